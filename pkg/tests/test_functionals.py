import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from sacesim.errors import DomainError
from sacesim.functionals import FunctionalSpec
from sacesim.spectral import SpectralField


class TestFunctionals:
    def test_parse(self):
        assert FunctionalSpec.parse("mode_k:3") == FunctionalSpec("mode_k", 3)
        assert FunctionalSpec.parse("mode_k") == FunctionalSpec("mode_k", 1)
        assert FunctionalSpec.parse(" cos_mode ") == FunctionalSpec("cos_mode")
        assert str(FunctionalSpec("mode_k", 2)) == "mode_k:2"

    @pytest.mark.parametrize("text", ["exp_neg_sq:2", "square", "mode_k:0"])
    def test_parse_errors(self, text):
        with pytest.raises((DomainError, ValueError)):
            FunctionalSpec.parse(text)

    def test_values(self):
        v = SpectralField([0.5, -1.0, 2.0])
        assert FunctionalSpec("exp_neg_sq")(v) == pytest.approx(math.exp(-5.25))
        assert FunctionalSpec("mode_k", 2)(v) == -1.0
        assert FunctionalSpec("cos_mode")(v) == pytest.approx(math.cos(0.5))
        assert FunctionalSpec("mode_k", 9)(v) == 0.0

    def test_batched(self):
        V = np.array([[0.0, 0.0], [1.0, 1.0]])
        assert_allclose(FunctionalSpec().evaluate(V), [1.0, math.exp(-2)])

    def test_classes(self):
        assert FunctionalSpec("exp_neg_sq").is_cb2
        assert FunctionalSpec("cos_mode").is_cb2
        assert not FunctionalSpec("mode_k").is_cb2
