import importlib
import pkgutil

import app.core


def test_core_is_a_regular_package():
    assert app.core.__file__ is not None
    assert app.core.__file__.endswith("__init__.py")


def test_every_core_subpackage_imports():
    names = sorted(m.name for m in pkgutil.iter_modules(app.core.__path__) if m.ispkg)
    assert names == ["bandwidth", "bench", "data", "dynamic", "gof", "parametric", "smoothing"]
    for name in names:
        assert importlib.import_module(f"app.core.{name}").__file__.endswith("__init__.py")
