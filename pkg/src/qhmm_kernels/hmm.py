"""Classical hidden Markov models over finite symbol alphabets.

The model is stored with a column-stochastic transition matrix acting on
column belief vectors (x' = A x), so the forward product 1^T T_y x0 is a
probability.  Model files and the built-in market model use the more common
row-per-source-state layout; loaders transpose on ingestion.
"""

import json
from dataclasses import dataclass

import numpy as np

STOCHASTIC_TOL = 1e-12
ENUMERATION_CAP = 2 ** 20


class UnknownSymbolError(ValueError):
    pass


class ImpossibleSymbolError(ValueError):
    """Conditioning on a symbol that has probability zero under the belief."""


@dataclass(frozen=True)
class ClassicalHmm:
    """HMM with n hidden states and an m-symbol alphabet.

    transition[j, i] = P[next state j | current state i]  (columns sum to 1)
    emission[a, i]   = P[symbol a | current state i]      (columns sum to 1)
    initial[i]       = P[start in state i]
    """

    alphabet: tuple
    transition: np.ndarray
    emission: np.ndarray
    initial: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.transition, dtype=float)
        b = np.asarray(self.emission, dtype=float)
        x0 = np.asarray(self.initial, dtype=float)
        n = a.shape[0]
        if a.shape != (n, n) or b.shape != (len(self.alphabet), n) or x0.shape != (n,):
            raise ValueError("inconsistent model shapes")
        for name, m in (("transition", a), ("emission", b)):
            if m.min() < 0:
                raise ValueError(f"{name} has negative entries")
            if np.abs(m.sum(axis=0) - 1.0).max() > STOCHASTIC_TOL:
                raise ValueError(f"{name} columns do not sum to 1")
        if x0.min() < 0 or abs(x0.sum() - 1.0) > STOCHASTIC_TOL:
            raise ValueError("initial belief is not on the simplex")
        for m in (a, b, x0):
            m.setflags(write=False)
        object.__setattr__(self, "transition", a)
        object.__setattr__(self, "emission", b)
        object.__setattr__(self, "initial", x0)

    @property
    def n_states(self):
        return self.transition.shape[0]

    def symbol_index(self, a):
        try:
            return self.alphabet.index(a)
        except ValueError:
            raise UnknownSymbolError(f"symbol {a!r} not in alphabet {self.alphabet}")


def from_row_stochastic(alphabet, transition_rows, emission_rows, initial):
    """Build a model from row-per-source-state matrices.

    transition_rows[i] is the distribution over next states given state i;
    emission_rows[i] is the distribution over symbols given state i.
    """
    a = np.asarray(transition_rows, dtype=float).T
    b = np.asarray(emission_rows, dtype=float).T
    return ClassicalHmm(tuple(alphabet), a, b, np.asarray(initial, dtype=float))


# Four-state market movement model: states (bear, bull, to-bear, to-bull),
# symbols 0 = price down, 1 = price up.  Uniform initial belief.
MARKET_TRANSITION_ROWS = (
    (0.50, 0.10, 0.15, 0.25),
    (0.10, 0.50, 0.25, 0.15),
    (0.25, 0.15, 0.50, 0.10),
    (0.15, 0.25, 0.10, 0.50),
)
MARKET_EMISSION_ROWS = (
    (0.80, 0.20),
    (0.20, 0.80),
    (0.40, 0.60),
    (0.60, 0.40),
)


def market_model():
    return from_row_stochastic(
        ("0", "1"), MARKET_TRANSITION_ROWS, MARKET_EMISSION_ROWS, (0.25,) * 4
    )


BUILTIN_MODELS = {"market4": market_model}


def builtin_model(name):
    if name not in BUILTIN_MODELS:
        raise KeyError(f"unknown built-in model {name!r}")
    return BUILTIN_MODELS[name]()


def observable_operator(model, a):
    """T_a = A diag(B[a, .]): emit from the current state, then transition."""
    idx = model.symbol_index(a)
    return model.transition @ np.diag(model.emission[idx])


def sequence_probability(model, y):
    x = model.initial.copy()
    for a in y:
        idx = model.symbol_index(a)
        x = model.transition @ (model.emission[idx] * x)
    return float(x.sum())


def feature_map(model, y):
    """Unnormalized forward message T_y x0; sums to the sequence probability."""
    x = model.initial.copy()
    for a in y:
        idx = model.symbol_index(a)
        x = model.transition @ (model.emission[idx] * x)
    return x


def belief_update(model, belief, a):
    """One filtering step: returns (normalized posterior, symbol probability)."""
    belief = np.asarray(belief, dtype=float)
    idx = model.symbol_index(a)
    x = model.transition @ (model.emission[idx] * belief)
    p = float(x.sum())
    if p <= 0.0:
        raise ImpossibleSymbolError(f"symbol {a!r} has probability 0 under belief")
    return x / p, p


def enumerate_distribution(model, t):
    """Exact distribution over all length-t sequences."""
    m = len(model.alphabet)
    if m ** t > ENUMERATION_CAP:
        raise ValueError(f"enumeration of {m}^{t} sequences exceeds cap")
    out = {}

    def rec(prefix, x):
        if len(prefix) == t:
            out[prefix] = float(x.sum())
            return
        for idx, a in enumerate(model.alphabet):
            rec(prefix + a, model.transition @ (model.emission[idx] * x))

    rec("", model.initial.copy())
    return out


def sample(model, length, rng):
    """Draw one observation sequence of the given length."""
    n = model.n_states
    state = rng.choice(n, p=model.initial)
    symbols = []
    for _ in range(length):
        idx = rng.choice(len(model.alphabet), p=model.emission[:, state])
        symbols.append(model.alphabet[idx])
        state = rng.choice(n, p=model.transition[:, state])
    return "".join(symbols)


def save(model, path):
    """Write the model as JSON in row-per-source-state layout."""
    doc = {
        "states": model.n_states,
        "alphabet": list(model.alphabet),
        "transition": model.transition.T.tolist(),
        "emission": model.emission.T.tolist(),
        "initial": model.initial.tolist(),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)


def load(path):
    with open(path) as fh:
        doc = json.load(fh)
    return from_row_stochastic(
        doc["alphabet"], doc["transition"], doc["emission"], doc["initial"]
    )
