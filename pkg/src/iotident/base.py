"""Minimal scikit-learn-compatible estimator plumbing.

Estimators here follow the sklearn parameter contract: constructor
arguments are stored verbatim under the same attribute names, state
learned by ``fit`` lives in trailing-underscore attributes, and
``get_params``/``set_params`` are derived from the constructor
signature. That keeps the classes clone- and pipeline-compatible
without depending on scikit-learn at runtime.
"""

from __future__ import annotations

import inspect


class Estimator:
    @classmethod
    def _param_names(cls):
        sig = inspect.signature(cls.__init__)
        return sorted(
            p.name for p in sig.parameters.values()
            if p.name != "self" and p.kind not in (p.VAR_POSITIONAL, p.VAR_KEYWORD)
        )

    def get_params(self, deep=True):
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params):
        valid = set(self._param_names())
        for name, value in params.items():
            if name not in valid:
                raise ValueError(
                    f"invalid parameter {name!r} for {type(self).__name__}; "
                    f"valid parameters: {sorted(valid)}")
            setattr(self, name, value)
        return self

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.get_params().items())
        return f"{type(self).__name__}({args})"
