import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pabandits.env import ContextualInstance, Noise  # noqa: E402
from pabandits.geometry import ConvexBody, cut, sample_projected  # noqa: E402


def random_contextual_instance(d: int, seed: int, m: int = 10, sigma: float = 1.0) -> ContextualInstance:
    """theta*, s* with uniform directions and norms uniform in [0.3, 1]."""
    rng = np.random.default_rng([d, seed, 99])
    vecs = []
    for _ in range(2):
        v = rng.standard_normal(d)
        vecs.append(v / np.linalg.norm(v) * rng.uniform(0.3, 1.0))
    return ContextualInstance(theta_star=vecs[0], s_star=vecs[1], m=m, noise=Noise(sigma=sigma))


def random_body(d: int, rng: np.random.Generator, n_cuts: int = 5) -> ConvexBody:
    """Unit ball cut ``n_cuts`` times, each hyperplane through a random point of the current body."""
    body = ConvexBody.ball(d)
    for _ in range(n_cuts):
        p = sample_projected(body, None, rng, 1, burn_in=30)[0]
        w = rng.standard_normal(d)
        w /= np.linalg.norm(w)
        body = cut(body, w, float(p @ w), "le")
    return body


def random_unit(d: int, rng: np.random.Generator) -> np.ndarray:
    w = rng.standard_normal(d)
    return w / np.linalg.norm(w)


@pytest.fixture
def report(request):
    """Print one visible PASS/FAIL line for an acceptance criterion."""
    capman = request.config.pluginmanager.getplugin("capturemanager")

    def _report(criterion: int, ok: bool, detail: str) -> None:
        line = f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} - {detail}"
        if capman is not None:
            with capman.global_and_fixture_disabled():
                print("\n" + line, flush=True)
        else:  # pragma: no cover
            print(line)

    return _report
