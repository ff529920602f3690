"""Self-adaptive reservoir network: leaky rate units with intrinsic plasticity.

Each instance is a fixed random recurrent network of ``size`` tanh rate
neurons.  The discrete-time update for neuron i is

    x_i <- (1 - dt/tau_i) * x_i + (dt/tau_i) * (gain * sum_j W_rec[i,j] * r_j
                                                + W_in[i] * u + B[i])
    r_i <- tanh(a_i * x_i + b_i)

Recurrent weights are drawn sparse Gaussian with standard deviation
1/sqrt(p_connect * size); the global ``gain`` multiplies the recurrent sum
exactly once, in the update above.  Input weights and auxiliary biases are
uniform in a small range.  Only the per-neuron transfer parameters (a, b) and
time constants (tau) adapt, during a pre-training phase; recurrent and input
weights never change.

Pre-training combines two unsupervised/semi-supervised passes:

* intrinsic plasticity: a gradient rule that pushes each neuron's rectified
  output toward an exponential distribution with mean ``IP_MU``,
* a time-constant search: per-neuron +/-20% perturbations of tau, accepted
  only when the validation MSE of a provisional ridge readout does not
  increase, so the validation trace is non-increasing by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, InputError, NumericError

IP_ETA = 1e-4
IP_MU = 0.2
A_MIN = 0.1
TAU_MAX_FACTOR = 50.0
TAU_PERTURB = 0.2
TAU_ROUNDS = 2
IP_WINDOW = 1000
IP_HOP = 500
TAU_WASHOUT = 100
TAU_FIT = 600
TAU_VAL = 300
TAU_EVAL_WINDOWS = 3
REPAIR_TOL = 1e-4
REPAIR_DAMP = 0.85
REPAIR_ROUNDS = 8
REPAIR_WINDOWS = 6
REPAIR_HORIZON = 1200


@dataclass
class ReservoirParams:
    """Construction parameters for one reservoir instance."""

    size: int = 30
    gain: float = 0.95
    p_connect: float = 0.2
    dt: float = 1.0
    tau_init: float = 2.0
    input_range: float = 0.1
    bias_range: float = 0.1
    seed: int = 0

    def validate(self) -> None:
        if self.size < 1:
            raise ConfigurationError(f"size must be >= 1, got {self.size}")
        if not 0.0 < self.p_connect <= 1.0:
            raise ConfigurationError(f"p_connect must be in (0, 1], got {self.p_connect}")
        if self.gain <= 0.0:
            raise ConfigurationError(f"gain must be > 0, got {self.gain}")
        if self.dt <= 0.0:
            raise ConfigurationError(f"dt must be > 0, got {self.dt}")
        if self.tau_init < self.dt:
            raise ConfigurationError(f"tau_init must be >= dt, got {self.tau_init}")
        if self.input_range < 0.0:
            raise ConfigurationError(f"input_range must be >= 0, got {self.input_range}")
        if self.bias_range < 0.0:
            raise ConfigurationError(f"bias_range must be >= 0, got {self.bias_range}")


@dataclass
class PretrainReport:
    """Diagnostics from a pre-training run."""

    kl_trace: list[float] = field(default_factory=list)
    val_mse_trace: list[float] = field(default_factory=list)
    tau_accept_count: int = 0
    repair_rounds: int = 0


class Reservoir:
    """One leg's recurrent network, advanced strictly one tick at a time."""

    def __init__(self, params: ReservoirParams):
        params.validate()
        self.params = params
        n = params.size
        rng = np.random.default_rng(params.seed)
        self.w_in = rng.uniform(-params.input_range, params.input_range, n)
        mask = rng.random((n, n)) < params.p_connect
        values = rng.normal(0.0, 1.0 / np.sqrt(params.p_connect * n), (n, n))
        self.w_rec = np.where(mask, values, 0.0)
        self.bias = rng.uniform(-params.bias_range, params.bias_range, n)
        self.a = np.ones(n)
        self.b = np.zeros(n)
        self.tau = np.full(n, params.tau_init)
        self.x = np.zeros(n)
        self.r = np.zeros(n)
        self.adapted = False
        self._rng = rng

    @property
    def size(self) -> int:
        return self.params.size

    def reset_state(self) -> None:
        self.x[:] = 0.0
        self.r[:] = 0.0

    def step(self, u: float) -> np.ndarray:
        """Advance one tick with scalar input ``u``; returns the rate vector."""
        if not np.isfinite(u):
            raise InputError(f"non-finite reservoir input: {u!r}")
        leak = self.params.dt / self.tau
        drive = self.params.gain * (self.w_rec @ self.r) + self.w_in * u + self.bias
        self.x = (1.0 - leak) * self.x + leak * drive
        self.r = np.tanh(self.a * self.x + self.b)
        return self.r

    def ip_update(self, eta: float = IP_ETA, mu: float = IP_MU) -> None:
        """One intrinsic-plasticity step on the current (x, r).

        Gradient rule for an exponential target distribution with mean ``mu``
        applied to the unit-interval output y = (r + 1) / 2:

            db = eta * (1 - (2 + 1/mu) * y + y^2 / mu)
            da = eta / a + x * db

        tanh is a rescaled logistic, so y is exactly a logistic unit and the
        logistic-neuron gradient rule applies unchanged; it drives y toward a
        sparse exponential profile (mostly near its floor, occasional large
        excursions).  Gains are clipped from below so the transfer stays
        non-degenerate.
        """
        if eta <= 0.0:
            raise ConfigurationError(f"ip learning rate must be > 0, got {eta}")
        if mu <= 0.0:
            raise ConfigurationError(f"ip target mean must be > 0, got {mu}")
        y = (self.r + 1.0) / 2.0
        db = eta * (1.0 - (2.0 + 1.0 / mu) * y + y * y / mu)
        da = eta / self.a + self.x * db
        self.a = np.maximum(self.a + da, A_MIN)
        self.b = self.b + db

    def rates_over(self, inputs: np.ndarray, reset: bool = True) -> np.ndarray:
        """Run the dynamics over a 1-D input sequence, returning (T, size) rates."""
        if reset:
            self.reset_state()
        out = np.empty((len(inputs), self.size))
        for t, u in enumerate(inputs):
            out[t] = self.step(float(u))
        return out

    def pretrain(
        self,
        inputs: np.ndarray,
        targets: np.ndarray,
        epochs: int,
        eta: float = IP_ETA,
        mu: float = IP_MU,
        ridge: float = 1e-4,
        noise: float = 0.0,
    ) -> PretrainReport:
        """Adapt (a, b) by intrinsic plasticity, then tau by accept/reject search.

        Runs ``epochs`` IP epochs over overlapping windows of the input, then
        ``epochs`` coordinate-search epochs on tau against fixed fit/validation
        windows.  After return the neuron parameters are considered frozen.
        """
        inputs = np.asarray(inputs, dtype=float)
        targets = np.asarray(targets, dtype=float)
        if inputs.size == 0:
            raise InputError("pretrain requires a non-empty input sequence")
        if inputs.shape != targets.shape:
            raise InputError(
                f"inputs/targets length mismatch: {inputs.shape} vs {targets.shape}"
            )
        report = PretrainReport()
        if epochs <= 0:
            return report

        window = min(IP_WINDOW, len(inputs))
        eval_start = self._eval_window_starts(len(inputs), window)[0]
        eval_inputs = inputs[eval_start : eval_start + window]

        report.kl_trace.append(self._eval_kl(eval_inputs, mu))
        for k in range(epochs):
            start = (k * IP_HOP) % max(1, len(inputs) - window + 1)
            self.reset_state()
            for u in inputs[start : start + window]:
                self.step(float(u))
                self.ip_update(eta, mu)
            report.kl_trace.append(self._eval_kl(eval_inputs, mu))

        self._tau_search(inputs, targets, epochs, ridge, noise, report)
        before = report.repair_rounds
        self._stability_repair(inputs, report)
        if report.repair_rounds > before:
            # damping costs capacity; let the time constants re-tune briefly
            self._tau_search(
                inputs, targets, max(1, epochs // 2), ridge, noise, report, record=False
            )
            self._stability_repair(inputs, report)
        self.reset_state()
        self.adapted = True
        return report

    # -- tau search -------------------------------------------------------

    def _eval_window_starts(self, length: int, window: int) -> list[int]:
        last = max(0, length - window)
        if last == 0:
            return [0]
        count = min(TAU_EVAL_WINDOWS, last + 1)
        return sorted({round(i * last / (count - 1)) for i in range(count)})

    def _tau_search(
        self,
        inputs: np.ndarray,
        targets: np.ndarray,
        epochs: int,
        ridge: float,
        noise: float,
        report: PretrainReport,
        record: bool = True,
    ) -> None:
        n = self.size
        window = min(IP_WINDOW, len(inputs))
        starts = self._eval_window_starts(len(inputs), window)
        segments = [
            (inputs[s : s + window], targets[s : s + window]) for s in starts
        ]
        washout = min(TAU_WASHOUT, window // 4)
        fit_end = washout + min(TAU_FIT, max(1, (window - washout) * 2 // 3))
        lo, hi = self.params.dt, TAU_MAX_FACTOR * self.params.dt

        for _ in range(epochs):
            chosen = None
            for _sweep in range(TAU_ROUNDS):
                signs = self._rng.choice((-1.0, 1.0), size=n)
                cand = np.clip(self.tau * (1.0 + TAU_PERTURB * signs), lo, hi)
                batch = np.tile(self.tau, (n + 1, 1))
                batch[1:][np.diag_indices(n)] = cand
                scores = self._score_tau_batch(batch, segments, washout, fit_end, ridge, noise)
                base = scores[0]
                accepted = np.flatnonzero(scores[1:] <= base)
                chosen = base
                if accepted.size == 1:
                    best = accepted[0]
                    self.tau = self.tau.copy()
                    self.tau[best] = cand[best]
                    chosen = scores[1 + best]
                    report.tau_accept_count += 1
                elif accepted.size:
                    combined = self.tau.copy()
                    combined[accepted] = cand[accepted]
                    comb_score = self._score_tau_batch(
                        combined[None, :], segments, washout, fit_end, ridge, noise
                    )[0]
                    if comb_score <= base:
                        self.tau = combined
                        chosen = comb_score
                        report.tau_accept_count += int(accepted.size)
                    else:
                        best = accepted[np.argmin(scores[1:][accepted])]
                        self.tau = self.tau.copy()
                        self.tau[best] = cand[best]
                        chosen = scores[1 + best]
                        report.tau_accept_count += 1
            if record:
                report.val_mse_trace.append(float(chosen))

    def _score_tau_batch(
        self,
        taus: np.ndarray,
        segments: list[tuple[np.ndarray, np.ndarray]],
        washout: int,
        fit_end: int,
        ridge: float,
        noise: float,
    ) -> np.ndarray:
        """Summed validation score of a provisional ridge readout per tau vector.

        The provisional readout is fit with the ridge the online learner will
        effectively have (base ridge plus accumulated synapse-noise variance)
        and scored by its expected validation MSE under that same noise,
        mean((pred - d)^2) + noise^2 ||w||^2, so candidates are judged by how
        robustly they support the readout, not only by a noise-free fit.

        Candidates only differ in tau, so every (segment, candidate) pair runs
        as one row of a stacked state matrix; the trajectories are exact.
        """
        b = len(taus)
        seg_len = min(len(seg_u) for seg_u, _ in segments)
        u_mat = np.stack([seg_u[:seg_len] for seg_u, _ in segments])
        d_mat = np.stack([seg_d[:seg_len] for _, seg_d in segments])
        rows = len(segments) * b
        leak = self.params.dt / np.tile(taus, (len(segments), 1))
        x = np.zeros((rows, self.size))
        r = np.zeros((rows, self.size))
        rates = np.empty((seg_len, rows, self.size))
        for t in range(seg_len):
            u_row = np.repeat(u_mat[:, t], b)
            drive = (
                self.params.gain * (r @ self.w_rec.T)
                + self.w_in * u_row[:, None]
                + self.bias
            )
            x = (1.0 - leak) * x + leak * drive
            r = np.tanh(self.a * x + self.b)
            rates[t] = r
        r_fit = rates[washout:fit_end].transpose(1, 0, 2)  # (rows, T_fit, N)
        r_val = rates[fit_end:].transpose(1, 0, 2)
        d_fit = np.repeat(d_mat[:, washout:fit_end], b, axis=0)  # (rows, T_fit)
        d_val = np.repeat(d_mat[:, fit_end:], b, axis=0)
        gram = r_fit.transpose(0, 2, 1) @ r_fit
        rhs = (d_fit[:, None, :] @ r_fit)[:, 0, :]
        fit_len = fit_end - washout
        eye = (ridge + noise**2 * fit_len) * np.eye(self.size)
        try:
            weights = np.linalg.solve(gram + eye[None, :, :], rhs[:, :, None])
        except np.linalg.LinAlgError as exc:
            raise NumericError(f"singular provisional readout system: {exc}") from exc
        pred = (r_val @ weights)[:, :, 0]
        mse = np.mean((pred - d_val) ** 2, axis=1)
        mse += noise**2 * np.sum(weights[:, :, 0] ** 2, axis=1)
        return mse.reshape(len(segments), b).sum(axis=0)

    def _eval_kl(self, inputs: np.ndarray, mu: float) -> float:
        rates = self.rates_over(inputs)
        self.reset_state()
        return kl_to_exponential(rates, mu)

    # -- stability repair --------------------------------------------------

    def _stability_repair(self, inputs: np.ndarray, report: PretrainReport) -> None:
        """Damp neurons whose trajectories depend on the starting state.

        Adapted gains and biases can leave units bistable (or only slowly
        contracting) under the rhythmic drive, so the trajectory would depend
        on initial state and the learned readout would not transfer across
        runs.  Trajectories from different initial states are compared on
        windows spread over the input; while they fail to converge, the
        worst-diverging neurons' transfer parameters are pulled back toward
        the linear regime.
        """
        window = min(REPAIR_HORIZON, len(inputs))
        last = max(0, len(inputs) - window)
        count = min(REPAIR_WINDOWS, last + 1)
        if count <= 1:
            starts = [0]
        else:
            starts = sorted({round(i * last / (count - 1)) for i in range(count)})
        streams = [inputs[s : s + window] for s in starts]
        for _ in range(REPAIR_ROUNDS):
            gap = self._divergence_sweep(streams)
            if gap.max() < REPAIR_TOL:
                return
            mask = gap >= 0.3 * gap.max()
            self.a[mask] = np.maximum(self.a[mask] * REPAIR_DAMP, A_MIN)
            self.b[mask] *= REPAIR_DAMP
            report.repair_rounds += 1

    def _state_after(self, inputs: np.ndarray) -> np.ndarray:
        """Membrane state reached from zeros after running an input stretch."""
        leak = self.params.dt / self.tau
        x = np.zeros(self.size)
        r = np.zeros(self.size)
        for u in inputs:
            drive = self.params.gain * (self.w_rec @ r) + self.w_in * float(u) + self.bias
            x = (1.0 - leak) * x + leak * drive
            r = np.tanh(self.a * x + self.b)
        return x

    def _divergence_sweep(self, streams: list[np.ndarray]) -> np.ndarray:
        """Worst per-neuron rate gap across streams and perturbed starts.

        For each stream the zero start is compared against constant-offset
        starts and against warm states reached on the other streams (the
        entries a gait switch makes).  All trajectory pairs run stacked in
        one batched pass; rows are independent.
        """
        seg_len = min(len(s) for s in streams)
        warm = [self._state_after(s[:300]) for s in streams]
        starts_b = []
        u_rows = []
        for j, stream in enumerate(streams):
            probes = [
                np.full(self.size, 0.5),
                np.full(self.size, -0.5),
                warm[(j + 1) % len(streams)],
                warm[(j + 2) % len(streams)],
            ]
            for x0 in probes:
                starts_b.append(x0)
                u_rows.append(stream[:seg_len])
        rows = len(starts_b)
        u_mat = np.stack(u_rows)  # (rows, T)
        leak = self.params.dt / self.tau
        xa = np.zeros((rows, self.size))
        ra = np.zeros((rows, self.size))
        xb = np.stack(starts_b)
        rb = np.tanh(self.a * xb + self.b)
        tail = max(1, seg_len - 100)
        gap = np.zeros(self.size)
        for t in range(seg_len):
            u_col = u_mat[:, t][:, None]
            drive_a = self.params.gain * (ra @ self.w_rec.T) + self.w_in * u_col + self.bias
            drive_b = self.params.gain * (rb @ self.w_rec.T) + self.w_in * u_col + self.bias
            xa = (1.0 - leak) * xa + leak * drive_a
            xb = (1.0 - leak) * xb + leak * drive_b
            ra = np.tanh(self.a * xa + self.b)
            rb = np.tanh(self.a * xb + self.b)
            if t >= tail:
                gap = np.maximum(gap, np.abs(ra - rb).max(axis=0))
        return gap


def kl_to_exponential(rates: np.ndarray, mu: float = IP_MU, bins: int = 20) -> float:
    """KL divergence of the output histogram from Exponential(mean=mu).

    Rates are mapped to the unit interval as y = (r + 1) / 2, the variable the
    intrinsic-plasticity rule shapes; the target is the exponential density
    truncated to [0, 1], discretized to the same bins.
    """
    y = (np.asarray(rates, dtype=float).ravel() + 1.0) / 2.0
    edges = np.linspace(0.0, 1.0, bins + 1)
    counts, _ = np.histogram(np.clip(y, 0.0, 1.0), bins=edges)
    p = counts / max(1, counts.sum())
    cdf = 1.0 - np.exp(-edges / mu)
    q = np.diff(cdf) / cdf[-1]
    eps = 1e-12
    return float(np.sum(p * np.log((p + eps) / (q + eps))))


def spectral_radius_estimate(
    w: np.ndarray, tol: float = 1e-6, max_iter: int = 100_000
) -> float:
    """Largest absolute eigenvalue by power iteration.

    Uses the two-step Krylov fit z ~ alpha*w_v + beta*v so complex-conjugate
    dominant pairs (common for random matrices) converge as well as real ones.
    """
    w = np.asarray(w, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise InputError(f"square matrix required, got shape {w.shape}")
    n = w.shape[0]
    v = np.ones(n)
    v[::2] += 0.5
    v /= np.linalg.norm(v)
    prev = np.inf
    for _ in range(max_iter):
        wv = w @ v
        norm_wv = np.linalg.norm(wv)
        if norm_wv == 0.0:
            return 0.0
        z = w @ wv
        basis = np.stack([wv, v], axis=1)
        coef, *_ = np.linalg.lstsq(basis, z, rcond=None)
        alpha, beta = coef
        roots = np.roots([1.0, -alpha, -beta])
        est = float(np.max(np.abs(roots)))
        if np.isfinite(est) and abs(est - prev) <= tol * max(est, 1e-30):
            return est
        prev = est
        norm_z = np.linalg.norm(z)
        v = z / norm_z if norm_z > 0.0 else wv / norm_wv
    raise NumericError(f"spectral radius estimate did not converge in {max_iter} iterations")
