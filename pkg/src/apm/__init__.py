"""Riemannian almost product manifolds: curvature, class membership and identity checks."""

from importlib import resources

__version__ = "0.1.0"

from .backend import ChartSpec, LieGroupSpec, SpecError, Tolerances, frame_at, validate_spec  # noqa: E402
from .specfile import dump_spec, load_spec, parse_spec  # noqa: E402
from .structure import classify  # noqa: E402
from .theorems import SuiteConfig, run_suite  # noqa: E402

EXAMPLES = (
    "flat_product",
    "warped_chart",
    "sphere_block",
    "twisted_chart",
    "heisenberg_padded",
    "su2_line",
    "searched_w3",
)


def example_path(name: str):
    """Path of a shipped example description (``name`` without ``.json``)."""
    if name not in EXAMPLES:
        raise KeyError(f"unknown example {name!r}; available: {', '.join(EXAMPLES)}")
    return resources.files(__name__) / "data" / f"{name}.json"


def load_example(name: str):
    return parse_spec(example_path(name).read_text(encoding="utf-8"))


__all__ = [
    "ChartSpec",
    "EXAMPLES",
    "LieGroupSpec",
    "SpecError",
    "SuiteConfig",
    "Tolerances",
    "classify",
    "dump_spec",
    "example_path",
    "frame_at",
    "load_example",
    "load_spec",
    "parse_spec",
    "run_suite",
    "validate_spec",
]
