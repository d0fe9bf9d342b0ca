"""Task families, datasets, non-stationary streams, and the task buffer.

Three synthetic families are supported:

* quadratic: f(w) = 0.5 w^T A w + w^T b with certified eigenvalue bounds on
  A. The loss is known in closed form; streamed "datapoints" are placeholder
  draws that only drive the data-arrival protocol (batch counting, learning
  efficiency), not the loss itself.
* sinusoid: regression from x to amplitude * sin(x + phase) with optional
  Gaussian target noise.
* classification: Gaussian clusters around class means, with a per-task
  label permutation so that label semantics change from task to task.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, StateError
from .numerics import Rng, eig_extremes, spd_sample

QUADRATIC = "quadratic"
SINUSOID = "sinusoid"
CLASSIFICATION = "classification"
FAMILIES = (QUADRATIC, SINUSOID, CLASSIFICATION)

SCHEDULE_IID = "iid"
SCHEDULE_PIECEWISE = "piecewise"
SCHEDULE_DRIFT = "drift"
SCHEDULE_KINDS = (SCHEDULE_IID, SCHEDULE_PIECEWISE, SCHEDULE_DRIFT)

MINIMIZER_CAP = 5.0  # keep quadratic minimizers in a bounded domain


@dataclass(frozen=True)
class QuadraticTask:
    """f(w) = 0.5 w^T a w + w^T b, with a symmetric and spec(a) in [mu, beta]."""

    a: np.ndarray
    b: np.ndarray
    mu: float
    beta: float

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or b.ndim != 1 or a.shape[0] != b.size:
            raise ParameterError(f"inconsistent shapes a={a.shape}, b={b.shape}")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ParameterError("task coefficients must be finite")
        if self.mu <= 0 or self.mu > self.beta:
            raise ParameterError(f"need 0 < mu <= beta, got mu={self.mu}, beta={self.beta}")
        lo, hi = eig_extremes(a)
        slack = 1e-8 * max(1.0, self.beta)
        if lo < self.mu - slack or hi > self.beta + slack:
            raise ParameterError(
                f"spectrum [{lo}, {hi}] escapes certified bounds [{self.mu}, {self.beta}]"
            )

    @property
    def dim(self) -> int:
        return self.b.size

    def minimizer(self) -> np.ndarray:
        return -np.linalg.solve(self.a, self.b)


@dataclass(frozen=True)
class SinusoidTask:
    amplitude: float
    phase: float
    input_range: tuple[float, float] = (-5.0, 5.0)
    noise_std: float = 0.0

    def __post_init__(self):
        if self.amplitude <= 0:
            raise ParameterError(f"amplitude must be positive, got {self.amplitude}")
        if self.input_range[0] >= self.input_range[1]:
            raise ParameterError(f"empty input range {self.input_range}")
        if self.noise_std < 0:
            raise ParameterError(f"noise_std must be >= 0, got {self.noise_std}")


@dataclass(frozen=True)
class SyntheticClassTask:
    """Gaussian-cluster classification; labels are reshuffled per task."""

    class_means: np.ndarray          # (C, p)
    input_noise_std: float
    label_permutation: tuple[int, ...]

    def __post_init__(self):
        means = np.asarray(self.class_means, dtype=float)
        object.__setattr__(self, "class_means", means)
        object.__setattr__(self, "label_permutation", tuple(int(k) for k in self.label_permutation))
        c = means.shape[0]
        if c < 2 or means.ndim != 2:
            raise ParameterError("need at least two class means in a (C, p) grid")
        if sorted(self.label_permutation) != list(range(c)):
            raise ParameterError(f"label_permutation is not a bijection on 0..{c - 1}")
        if self.input_noise_std < 0:
            raise ParameterError("input_noise_std must be >= 0")
        for i in range(c):
            for j in range(i + 1, c):
                if np.allclose(means[i], means[j]):
                    raise ParameterError(f"class means {i} and {j} coincide")

    @property
    def class_count(self) -> int:
        return self.class_means.shape[0]


@dataclass(frozen=True)
class Dataset:
    """Paired (inputs, targets) arrays of equal length for one task."""

    inputs: np.ndarray   # (n, p)
    targets: np.ndarray  # (n, q); q may be 0 for tasks whose loss needs no targets
    task_id: int = 0

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        y = np.asarray(self.targets, dtype=float)
        if y.ndim == 1:
            y = y.reshape(-1, 1)
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "targets", y)
        if x.shape[0] != y.shape[0]:
            raise ParameterError(f"inputs ({x.shape[0]}) and targets ({y.shape[0]}) differ in length")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ParameterError("dataset entries must be finite")

    def __len__(self) -> int:
        return self.inputs.shape[0]


def merge_datasets(parts: list[Dataset]) -> Dataset:
    """Concatenate datasets; task_id becomes -1 when sources are mixed."""
    if not parts:
        raise StateError("cannot merge an empty list of datasets")
    ids = {p.task_id for p in parts}
    tid = parts[0].task_id if len(ids) == 1 else -1
    return Dataset(
        inputs=np.concatenate([p.inputs for p in parts]),
        targets=np.concatenate([p.targets for p in parts]),
        task_id=tid,
    )


# ---------------------------------------------------------------------------
# losses and sampling


def quad_loss(task: QuadraticTask, w: np.ndarray) -> float:
    w = np.asarray(w, dtype=float)
    if w.shape != task.b.shape:
        raise ParameterError(f"parameter shape {w.shape} does not match task dim {task.dim}")
    return float(0.5 * w @ task.a @ w + w @ task.b)


def quad_grad(task: QuadraticTask, w: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.shape != task.b.shape:
        raise ParameterError(f"parameter shape {w.shape} does not match task dim {task.dim}")
    return task.a @ w + task.b


def sinusoid_sample(task: SinusoidTask, n: int, rng: Rng) -> Dataset:
    """n points with x ~ U(input_range) and y = amplitude sin(x + phase) + noise."""
    if n < 1:
        raise ParameterError(f"sample count must be >= 1, got {n}")
    lo, hi = task.input_range
    x = rng.uniform(lo, hi, size=n)
    y = task.amplitude * np.sin(x + task.phase) + task.noise_std * rng.normal(size=n)
    return Dataset(inputs=x.reshape(-1, 1), targets=y.reshape(-1, 1))


def class_sample(task: SyntheticClassTask, n: int, rng: Rng) -> Dataset:
    """n points: uniform class, mean + Gaussian noise, one-hot permuted label."""
    if n < 1:
        raise ParameterError(f"sample count must be >= 1, got {n}")
    c = task.class_count
    p = task.class_means.shape[1]
    ks = rng.integers(c, size=n)
    x = task.class_means[ks] + task.input_noise_std * rng.normal(size=(n, p))
    perm = np.asarray(task.label_permutation)
    y = np.zeros((n, c))
    y[np.arange(n), perm[ks]] = 1.0
    return Dataset(inputs=x, targets=y)


def minibatch(data: Dataset, n: int, rng: Rng) -> Dataset:
    """Uniform minibatch: without replacement when n <= len(data), with otherwise.

    The with-replacement fallback matters early in a round, when the
    accumulated data is still smaller than the configured batch.
    """
    if n < 1:
        raise ParameterError(f"batch size must be >= 1, got {n}")
    if len(data) == 0:
        raise StateError("cannot draw a minibatch from an empty dataset")
    idx = rng.choice(len(data), size=n, replace=n > len(data))
    return Dataset(inputs=data.inputs[idx], targets=data.targets[idx], task_id=data.task_id)


# ---------------------------------------------------------------------------
# schedules (the per-round task sequence)


def _quad_b(dim: int, a: np.ndarray, rng: Rng) -> np.ndarray:
    b = rng.uniform(-1.0, 1.0, size=dim)
    if not np.any(b):
        b = np.full(dim, 0.5)
    w_star = np.linalg.solve(a, b)
    cap = np.linalg.norm(w_star)
    if cap > MINIMIZER_CAP:
        b = b * (MINIMIZER_CAP / cap)
    return b


def quadratic_schedule(
    rounds: int,
    dim: int,
    mu: float,
    beta: float,
    rng: Rng,
    kind: str = SCHEDULE_IID,
    switch_every: int = 10,
    shared_b: bool = False,
) -> list[QuadraticTask]:
    """Round-indexed quadratic tasks. shared_b fixes b across rounds while the
    curvature keeps changing, the construction that separates joint training
    from meta-learning."""
    _check_schedule_args(rounds, kind, switch_every)
    fixed_b = _quad_b(dim, spd_sample(dim, mu, beta, rng.spawn(0)), rng.spawn(1)) if shared_b else None

    def draw(r: Rng) -> QuadraticTask:
        a = spd_sample(dim, mu, beta, r)
        b = fixed_b if fixed_b is not None else _quad_b(dim, a, r)
        return QuadraticTask(a=a, b=b, mu=mu, beta=beta)

    if kind == SCHEDULE_IID:
        return [draw(rng.spawn(10 + t)) for t in range(rounds)]
    if kind == SCHEDULE_PIECEWISE:
        return [draw(rng.spawn(10 + t - (t % switch_every))) for t in range(rounds)]
    # drift: convex combination of two endpoint tasks; spectra stay in [mu, beta]
    t0, t1 = draw(rng.spawn(10)), draw(rng.spawn(11))
    out = []
    for t in range(rounds):
        s = t / max(1, rounds - 1)
        out.append(QuadraticTask(a=(1 - s) * t0.a + s * t1.a, b=(1 - s) * t0.b + s * t1.b, mu=mu, beta=beta))
    return out


def sinusoid_schedule(
    rounds: int,
    rng: Rng,
    kind: str = SCHEDULE_IID,
    switch_every: int = 10,
    amplitude_range: tuple[float, float] = (0.1, 5.0),
    phase_range: tuple[float, float] = (0.0, math.pi),
    input_range: tuple[float, float] = (-5.0, 5.0),
    noise_std: float = 0.0,
) -> list[SinusoidTask]:
    _check_schedule_args(rounds, kind, switch_every)

    def draw(r: Rng) -> SinusoidTask:
        return SinusoidTask(
            amplitude=float(r.uniform(*amplitude_range)),
            phase=float(r.uniform(*phase_range)),
            input_range=input_range,
            noise_std=noise_std,
        )

    if kind == SCHEDULE_IID:
        return [draw(rng.spawn(10 + t)) for t in range(rounds)]
    if kind == SCHEDULE_PIECEWISE:
        return [draw(rng.spawn(10 + t - (t % switch_every))) for t in range(rounds)]
    t0, t1 = draw(rng.spawn(10)), draw(rng.spawn(11))
    out = []
    for t in range(rounds):
        s = t / max(1, rounds - 1)
        out.append(
            SinusoidTask(
                amplitude=(1 - s) * t0.amplitude + s * t1.amplitude,
                phase=(1 - s) * t0.phase + s * t1.phase,
                input_range=input_range,
                noise_std=noise_std,
            )
        )
    return out


def classification_schedule(
    rounds: int,
    rng: Rng,
    class_count: int = 3,
    input_dim: int = 2,
    mean_scale: float = 3.0,
    input_noise_std: float = 0.5,
    kind: str = SCHEDULE_IID,
    switch_every: int = 10,
) -> list[SyntheticClassTask]:
    _check_schedule_args(rounds, kind, switch_every)

    def draw(r: Rng) -> SyntheticClassTask:
        means = mean_scale * r.normal(size=(class_count, input_dim))
        perm = tuple(int(k) for k in r.permutation(class_count))
        return SyntheticClassTask(class_means=means, input_noise_std=input_noise_std, label_permutation=perm)

    if kind == SCHEDULE_IID:
        return [draw(rng.spawn(10 + t)) for t in range(rounds)]
    if kind == SCHEDULE_PIECEWISE:
        return [draw(rng.spawn(10 + t - (t % switch_every))) for t in range(rounds)]
    t0, t1 = draw(rng.spawn(10)), draw(rng.spawn(11))
    out = []
    for t in range(rounds):
        s = t / max(1, rounds - 1)
        out.append(
            SyntheticClassTask(
                class_means=(1 - s) * t0.class_means + s * t1.class_means,
                input_noise_std=input_noise_std,
                label_permutation=t0.label_permutation,
            )
        )
    return out


def _check_schedule_args(rounds: int, kind: str, switch_every: int):
    if rounds < 1:
        raise ParameterError(f"rounds must be >= 1, got {rounds}")
    if kind not in SCHEDULE_KINDS:
        raise ParameterError(f"unknown schedule kind {kind!r}")
    if switch_every < 1:
        raise ParameterError(f"switch_every must be >= 1, got {switch_every}")


# ---------------------------------------------------------------------------
# stream


@dataclass
class TaskStream:
    """A per-round task schedule plus seeded data generation.

    Round t's data comes from rng.spawn(t) (1-based), so the full transcript
    of tasks and datasets is a pure function of the seed and settings, and
    any consumer can regenerate any round independently.
    """

    family: str
    schedule: list
    total_rounds: int
    points_per_task: int
    batch_size: int
    rng: Rng

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ParameterError(f"unknown task family {self.family!r}")
        if self.total_rounds < 1:
            raise ParameterError("total_rounds must be >= 1")
        if not (1 <= self.batch_size <= self.points_per_task):
            raise ParameterError(
                f"need points_per_task >= batch_size >= 1, got N={self.points_per_task}, n={self.batch_size}"
            )
        if len(self.schedule) != self.total_rounds:
            raise ParameterError(
                f"schedule length {len(self.schedule)} != total_rounds {self.total_rounds}"
            )


def make_stream(
    family: str,
    rounds: int,
    points_per_task: int,
    batch_size: int,
    rng: Rng,
    schedule_kind: str = SCHEDULE_IID,
    **family_kwargs,
) -> TaskStream:
    """Build a stream whose schedule is drawn from rng.spawn(0)."""
    sched_rng = rng.spawn(0)
    if family == QUADRATIC:
        schedule = quadratic_schedule(rounds, rng=sched_rng, kind=schedule_kind, **family_kwargs)
    elif family == SINUSOID:
        schedule = sinusoid_schedule(rounds, rng=sched_rng, kind=schedule_kind, **family_kwargs)
    elif family == CLASSIFICATION:
        schedule = classification_schedule(rounds, rng=sched_rng, kind=schedule_kind, **family_kwargs)
    else:
        raise ParameterError(f"unknown task family {family!r}")
    return TaskStream(
        family=family,
        schedule=schedule,
        total_rounds=rounds,
        points_per_task=points_per_task,
        batch_size=batch_size,
        rng=rng,
    )


def _sample_family(family: str, task, n: int, rng: Rng, task_id: int) -> Dataset:
    if family == SINUSOID:
        data = sinusoid_sample(task, n, rng)
    elif family == CLASSIFICATION:
        data = class_sample(task, n, rng)
    else:
        # Quadratic losses need no observations; emit placeholder covariate
        # draws so batch counting and the buffer protocol stay uniform.
        data = Dataset(inputs=rng.normal(size=(n, task.dim)), targets=np.zeros((n, 0)))
    return Dataset(inputs=data.inputs, targets=data.targets, task_id=task_id)


def stream_next(stream: TaskStream, t: int):
    """(task, batch generator) for 1-based round t.

    The generator yields batches of ``batch_size`` points until
    ``points_per_task`` have been produced (last batch may be short).
    Repeated calls for the same round regenerate identical data.
    """
    if not (1 <= t <= stream.total_rounds):
        raise ParameterError(f"round {t} outside 1..{stream.total_rounds}")
    task = stream.schedule[t - 1]

    def batches():
        data_rng = stream.rng.spawn(t).spawn(0)
        produced = 0
        while produced < stream.points_per_task:
            k = min(stream.batch_size, stream.points_per_task - produced)
            yield _sample_family(stream.family, task, k, data_rng, task_id=t)
            produced += k

    return task, batches()


def stream_test_data(stream: TaskStream, t: int, n_test: int) -> Dataset:
    """Held-out evaluation data for round t, disjoint from the training stream."""
    if not (1 <= t <= stream.total_rounds):
        raise ParameterError(f"round {t} outside 1..{stream.total_rounds}")
    if n_test < 1:
        raise ParameterError(f"n_test must be >= 1, got {n_test}")
    task = stream.schedule[t - 1]
    test_rng = stream.rng.spawn(t).spawn(1)
    return _sample_family(stream.family, task, n_test, test_rng, task_id=t)


# ---------------------------------------------------------------------------
# buffer


class TaskBuffer:
    """Ordered store of every task seen so far and its accumulated data.

    All data is retained for the whole run; there is no eviction.
    """

    def __init__(self):
        self._ids: list[int] = []
        self._tasks: dict[int, object] = {}
        self._data: dict[int, Dataset] = {}

    def __len__(self) -> int:
        return len(self._ids)

    def task_ids(self) -> list[int]:
        return list(self._ids)

    def latest_id(self) -> int:
        if not self._ids:
            raise StateError("buffer is empty")
        return self._ids[-1]

    def add_task(self, task_id: int, task) -> None:
        if self._ids and task_id <= self._ids[-1]:
            raise ParameterError(
                f"task ids must be strictly increasing, got {task_id} after {self._ids[-1]}"
            )
        self._ids.append(task_id)
        self._tasks[task_id] = task
        self._data[task_id] = None

    def append(self, task_id: int, batch: Dataset) -> None:
        if task_id not in self._tasks:
            raise StateError(f"task {task_id} not in buffer")
        cur = self._data[task_id]
        self._data[task_id] = batch if cur is None else merge_datasets([cur, batch])

    def task(self, task_id: int):
        if task_id not in self._tasks:
            raise StateError(f"task {task_id} not in buffer")
        return self._tasks[task_id]

    def data(self, task_id: int) -> Dataset:
        if task_id not in self._tasks:
            raise StateError(f"task {task_id} not in buffer")
        if self._data[task_id] is None:
            raise StateError(f"task {task_id} has no data yet")
        return self._data[task_id]

    def has_data(self, task_id: int) -> bool:
        return self._data.get(task_id) is not None

    def all_tasks(self) -> list:
        return [self._tasks[i] for i in self._ids]


# ---------------------------------------------------------------------------
# CSV debugging export (not a stability contract)


def dataset_to_csv(data: Dataset, path) -> None:
    p = data.inputs.shape[1]
    q = data.targets.shape[1]
    header = ["task_id"] + [f"x_{i}" for i in range(p)] + [f"y_{i}" for i in range(q)]
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(len(data)):
            row = [str(data.task_id)]
            row += [f"{v:.17g}" for v in data.inputs[i]]
            row += [f"{v:.17g}" for v in data.targets[i]]
            fh.write(",".join(row) + "\n")


def dataset_from_csv(path) -> Dataset:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        p = sum(1 for h in header if h.startswith("x_"))
        q = sum(1 for h in header if h.startswith("y_"))
        xs, ys, tid = [], [], 0
        for line in fh:
            cells = line.strip().split(",")
            if not cells or cells == [""]:
                continue
            tid = int(cells[0])
            xs.append([float(v) for v in cells[1 : 1 + p]])
            ys.append([float(v) for v in cells[1 + p : 1 + p + q]])
    return Dataset(inputs=np.array(xs), targets=np.array(ys).reshape(len(xs), q), task_id=tid)
