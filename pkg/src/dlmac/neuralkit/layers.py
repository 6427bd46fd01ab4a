"""Dense and LSTM layers with explicit forward/backward passes (float64)."""
import numpy as np


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


class Dense:
    kind = "dense"
    param_names = ("W", "b")

    def __init__(self, n_in, n_out, activation="none"):
        if activation not in ("relu", "none"):
            raise ValueError(f"unsupported activation {activation!r}")
        self.n_in, self.n_out, self.activation = int(n_in), int(n_out), activation

    @property
    def in_dim(self):
        return self.n_in

    @property
    def out_dim(self):
        return self.n_out

    def spec(self):
        return {"kind": "dense", "in": self.n_in, "out": self.n_out,
                "activation": self.activation}

    def init(self, rng):
        k = 1.0 / np.sqrt(self.n_in)
        return {"W": rng.uniform(-k, k, (self.n_in, self.n_out)),
                "b": rng.uniform(-k, k, self.n_out)}

    def forward(self, p, x):
        z = x @ p["W"] + p["b"]
        y = np.maximum(z, 0.0) if self.activation == "relu" else z
        return y, (x, z)

    def backward(self, p, dy, cache):
        x, z = cache
        if self.activation == "relu":
            dy = dy * (z > 0)
        grads = {"W": x.T @ dy, "b": dy.sum(axis=0)}
        return dy @ p["W"].T, grads


class LSTM:
    """Single LSTM layer over (batch, steps, features); emits the last hidden state.

    Gate order in the packed weights is input, forget, cell, output.
    """
    kind = "lstm"
    param_names = ("W", "U", "b")

    def __init__(self, n_in, hidden):
        self.n_in, self.hidden = int(n_in), int(hidden)

    @property
    def in_dim(self):
        return self.n_in

    @property
    def out_dim(self):
        return self.hidden

    def spec(self):
        return {"kind": "lstm", "in": self.n_in, "hidden": self.hidden}

    def init(self, rng):
        H = self.hidden
        k = 1.0 / np.sqrt(self.n_in + H)
        return {"W": rng.uniform(-k, k, (self.n_in, 4 * H)),
                "U": rng.uniform(-k, k, (H, 4 * H)),
                "b": rng.uniform(-k, k, 4 * H)}

    def forward(self, p, x):
        B, T, _ = x.shape
        H = self.hidden
        xw = (x.reshape(B * T, -1) @ p["W"]).reshape(B, T, 4 * H) + p["b"]
        h = np.zeros((B, H))
        c = np.zeros((B, H))
        steps = []
        for t in range(T):
            z = xw[:, t] + h @ p["U"]
            i = sigmoid(z[:, :H])
            f = sigmoid(z[:, H:2 * H])
            g = np.tanh(z[:, 2 * H:3 * H])
            o = sigmoid(z[:, 3 * H:])
            c_prev, h_prev = c, h
            c = f * c_prev + i * g
            tc = np.tanh(c)
            h = o * tc
            steps.append((h_prev, c_prev, i, f, g, o, tc))
        return h, (x, steps)

    def backward(self, p, dh, cache):
        x, steps = cache
        B, T, F = x.shape
        H = self.hidden
        dW = np.zeros_like(p["W"])
        dU = np.zeros_like(p["U"])
        db = np.zeros_like(p["b"])
        dx = np.empty_like(x)
        dc = np.zeros((B, H))
        for t in reversed(range(T)):
            h_prev, c_prev, i, f, g, o, tc = steps[t]
            do = dh * tc
            dc = dc + dh * o * (1.0 - tc * tc)
            di = dc * g
            dg = dc * i
            df = dc * c_prev
            dz = np.concatenate([di * i * (1 - i), df * f * (1 - f),
                                 dg * (1 - g * g), do * o * (1 - o)], axis=1)
            dW += x[:, t].T @ dz
            dU += h_prev.T @ dz
            db += dz.sum(axis=0)
            dx[:, t] = dz @ p["W"].T
            dh = dz @ p["U"].T
            dc = dc * f
        return dx, {"W": dW, "U": dU, "b": db}


def layer_from_spec(spec):
    kind = spec["kind"]
    if kind == "dense":
        return Dense(spec["in"], spec["out"], spec.get("activation", "none"))
    if kind == "lstm":
        return LSTM(spec["in"], spec["hidden"])
    raise ValueError(f"unknown layer kind {kind!r}")
