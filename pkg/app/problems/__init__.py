from typing import Callable, Dict

from app.problems.base import BaseProblem
from app.problems.circle import CircleProblem
from app.problems.double_circle import DoubleCircleProblem
from app.problems.layers import LayersProblem
from app.problems.line_singular import LineSingularProblem

PROBLEMS: Dict[str, Callable[..., BaseProblem]] = {
    "circle": CircleProblem,
    "line_singular": LineSingularProblem,
    "double_circle": DoubleCircleProblem,
    "layers": LayersProblem,
}


def get_problem(name: str, **params) -> BaseProblem:
    try:
        factory = PROBLEMS[name]
    except KeyError:
        raise ValueError(f"Unknown example '{name}' (known: {', '.join(sorted(PROBLEMS))})")
    return factory(**params)


__all__ = ["PROBLEMS", "BaseProblem", "get_problem"]
