import numpy as np
import pytest

from balweights.data import (
    Dataset,
    Estimand,
    Method,
    TruthRecord,
    WeightVector,
    validate_dataset,
)
from balweights.errors import DataError


def test_valid_dataset_passes_through_unchanged():
    d = Dataset([[0.1], [0.2], [0.3], [0.4]], [1, 0, 1, 0])
    assert validate_dataset(d) is d
    assert d.n == 4 and d.k == 1
    assert d.covariate_names == ("x1",)
    assert d.treatment.dtype == np.int64


@pytest.mark.parametrize(
    "X, z, y, code",
    [
        ([[1.0], [2.0], [3.0]], [1, 1, 1], None, "DEGENERATE_ARM"),
        ([[1.0], [2.0], [3.0]], [0, 0, 0], None, "DEGENERATE_ARM"),
        ([[1.0], [np.nan], [3.0], [4.0]], [1, 0, 1, 0], None, "NON_FINITE_VALUE"),
        ([[1.0], [np.inf], [3.0], [4.0]], [1, 0, 1, 0], None, "NON_FINITE_VALUE"),
        ([[1.0], [2.0], [3.0]], [1, 0, 2], None, "NON_BINARY_TREATMENT"),
        ([[1.0], [2.0], [3.0]], [1, 0], None, "LENGTH_MISMATCH"),
        ([[1.0], [2.0], [3.0]], [1, 0, 1], [1.0, 2.0], "LENGTH_MISMATCH"),
        ([[1.0], [2.0], [3.0]], [1, 0, 1], [1.0, np.nan, 2.0], "NON_FINITE_VALUE"),
        ([[1.0]], [1], None, "LENGTH_MISMATCH"),
    ],
)
def test_invalid_datasets_are_rejected(X, z, y, code):
    with pytest.raises(DataError) as exc:
        Dataset(X, z, y)
    assert exc.value.code == code


def test_arrays_are_read_only(tiny):
    with pytest.raises(ValueError):
        tiny.covariates[0, 0] = 99.0
    with pytest.raises(ValueError):
        tiny.treatment[0] = 0


def test_inputs_are_copied():
    X = np.array([[1.0], [2.0], [3.0]])
    d = Dataset(X, [1, 0, 1])
    X[0, 0] = -5.0
    assert d.covariates[0, 0] == 1.0


def test_truth_record_unit_effect_and_att():
    y0 = np.array([1.0, 2.0, 3.0, 4.0])
    y1 = np.array([2.0, 4.0, 3.5, 8.0])
    z = np.array([1, 0, 1, 0])
    t = TruthRecord(y0, y1, true_att=np.mean((y1 - y0)[z == 1]))
    np.testing.assert_array_equal(t.unit_effect, y1 - y0)
    d = Dataset(np.arange(4.0), z, truth=t)
    assert abs(np.mean(d.truth.unit_effect[z == 1]) - d.truth.true_att) <= 1e-12


def test_inconsistent_truth_is_rejected():
    t = TruthRecord([0.0, 0.0], [1.0, 2.0], true_att=5.0)
    with pytest.raises(DataError) as exc:
        Dataset([[0.0], [1.0]], [1, 0], truth=t)
    assert exc.value.code == "INCONSISTENT_TRUTH"


def test_weight_vector_rejects_negative_and_nonfinite():
    with pytest.raises(DataError):
        WeightVector([1.0, -0.1], Estimand.ATT, Method.IPW)
    with pytest.raises(DataError):
        WeightVector([1.0, np.nan], Estimand.ATT, Method.IPW)
    w = WeightVector([1.0, 2.0], "ATO", "OVERLAP")
    assert w.estimand is Estimand.ATO and w.method is Method.OVERLAP
    assert w.label == "OVERLAP-ATO"


def test_treatment_booleans_and_float_codes_are_coerced():
    d = Dataset([[0.0], [1.0], [2.0]], np.array([1.0, 0.0, 1.0]))
    assert d.treatment.tolist() == [1, 0, 1]
    d = Dataset([[0.0], [1.0], [2.0]], np.array([True, False, True]))
    assert d.n_treated == 2 and d.n_control == 1
