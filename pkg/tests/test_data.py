import numpy as np
import pytest

from helpers import masked_matrix, observed_matrix
from pcplod.data import (
    BELOW_LOD,
    MISSING,
    OBSERVED,
    MaskedMatrix,
    MatrixSchema,
    fmt_float,
    read_dense_csv,
    read_matrix_csv,
    standardize_columns,
    write_masked_csv,
    write_matrix_csv,
)
from pcplod.errors import (
    DegenerateColumnError,
    DomainError,
    ParseError,
    SchemaError,
)


def write_text(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


class TestReadMatrixCsv:
    def test_all_observed(self, tmp_path):
        path = write_text(tmp_path, "m.csv", "a,b\n1.0,2.0\n3.0,4.0\n")
        X = read_matrix_csv(path)
        assert X.column_names == ("a", "b")
        assert (X.status == OBSERVED).all()
        assert np.array_equal(X.values, [[1.0, 2.0], [3.0, 4.0]])

    def test_lod_token_uses_column_lod(self, tmp_path):
        path = write_text(tmp_path, "m.csv", "a,b\n0.5,0.7\n<LOD,2.0\n1.0,3.0\n")
        X = read_matrix_csv(path, MatrixSchema(lod_row=True))
        assert X.status[0, 0] == BELOW_LOD
        assert X.delta[0, 0] == 0.5
        assert np.isnan(X.values[0, 0])
        assert X.values[1, 1] == 3.0

    def test_empty_cell_without_lod_is_missing(self, tmp_path):
        path = write_text(tmp_path, "m.csv", "a,b\n,2.0\n1.0,3.0\n")
        X = read_matrix_csv(path)
        assert X.status[0, 0] == MISSING
        assert np.isnan(X.values[0, 0])

    def test_empty_cell_with_lod_row_is_censored(self, tmp_path):
        path = write_text(tmp_path, "m.csv", "a,b\n0.5,0.7\n,2.0\n")
        X = read_matrix_csv(path, MatrixSchema(lod_row=True))
        assert X.status[0, 0] == BELOW_LOD
        assert X.delta[0, 0] == 0.5

    def test_na_token_stays_missing_even_with_lod_row(self, tmp_path):
        path = write_text(tmp_path, "m.csv", "a,b\n0.5,0.7\nNA,2.0\n")
        X = read_matrix_csv(path, MatrixSchema(lod_row=True))
        assert X.status[0, 0] == MISSING

    def test_malformed_cell_reports_location(self, tmp_path):
        path = write_text(tmp_path, "m.csv", "a,b\n1.0,oops\n")
        with pytest.raises(ParseError, match=r"row 1, column 'b'"):
            read_matrix_csv(path)

    def test_lod_token_without_metadata_is_schema_error(self, tmp_path):
        path = write_text(tmp_path, "m.csv", "a,b\n<LOD,2.0\n")
        with pytest.raises(SchemaError):
            read_matrix_csv(path)

    def test_nonpositive_lod_is_schema_error(self, tmp_path):
        path = write_text(tmp_path, "m.csv", "a,b\n0.0,0.7\n<LOD,2.0\n")
        with pytest.raises(SchemaError):
            read_matrix_csv(path, MatrixSchema(lod_row=True))

    def test_negative_observed_is_domain_error(self, tmp_path):
        path = write_text(tmp_path, "m.csv", "a,b\n-1.0,2.0\n")
        with pytest.raises(DomainError):
            read_matrix_csv(path)

    def test_header_mismatch(self, tmp_path):
        path = write_text(tmp_path, "m.csv", "a,b\n1.0,2.0\n")
        with pytest.raises(SchemaError):
            read_matrix_csv(path, MatrixSchema(columns=("x", "y")))

    def test_ragged_row(self, tmp_path):
        path = write_text(tmp_path, "m.csv", "a,b\n1.0\n")
        with pytest.raises(ParseError):
            read_matrix_csv(path)


class TestMaskedRoundTrip:
    def build(self):
        values = [[1.0, 2.0, 0.5], [3.0, 1.0 / 3.0, 4.0]]
        status = [[OBSERVED, BELOW_LOD, MISSING], [OBSERVED, OBSERVED, BELOW_LOD]]
        delta = [[0.0, 0.7, 0.0], [0.0, 0.0, 1.25]]
        return masked_matrix(values, status, delta, names=["a", "b", "c"])

    def test_statuses_and_values_exact(self, tmp_path):
        X = self.build()
        write_masked_csv(X, tmp_path / "x.csv")
        Y = read_matrix_csv(tmp_path / "x.csv", MatrixSchema(sidecar=True))
        assert np.array_equal(X.status, Y.status)
        assert np.array_equal(X.delta, Y.delta)
        assert np.array_equal(X.values, Y.values, equal_nan=True)
        assert X.column_names == Y.column_names

    def test_censored_cell_with_bad_delta_rejected(self, tmp_path):
        X = self.build()
        write_masked_csv(X, tmp_path / "x.csv")
        # corrupt the delta sidecar at a censored position
        delta_path = tmp_path / "x.delta.csv"
        lines = delta_path.read_text().splitlines()
        lines[1] = "0,0,0"
        delta_path.write_text("\n".join(lines) + "\n")
        with pytest.raises(SchemaError):
            read_matrix_csv(tmp_path / "x.csv", MatrixSchema(sidecar=True))


class TestWriteMatrixCsv:
    def test_dense_round_trip_is_exact(self, tmp_path):
        rng = np.random.default_rng(3)
        M = rng.standard_normal((7, 4)) * np.exp(rng.uniform(-20, 20, (7, 4)))
        write_matrix_csv(M, tmp_path / "m.csv")
        back, names = read_dense_csv(tmp_path / "m.csv")
        assert names == ("x1", "x2", "x3", "x4")
        assert np.array_equal(M, back)

    def test_zero_serialized_bare(self, tmp_path):
        write_matrix_csv(np.array([[0.0]]), tmp_path / "m.csv")
        assert (tmp_path / "m.csv").read_text().splitlines()[1] == "0"

    def test_one_third_has_17_significant_digits(self):
        token = fmt_float(1.0 / 3.0)
        digits = token.replace("0.", "", 1)
        assert len(digits) >= 17
        assert float(token) == 1.0 / 3.0


class TestMaskedMatrixInvariants:
    def test_negative_observed_rejected(self):
        with pytest.raises(DomainError):
            observed_matrix([[-1.0, 2.0]])

    def test_nonfinite_observed_rejected(self):
        with pytest.raises(DomainError):
            observed_matrix([[np.inf, 2.0]])

    def test_censored_needs_positive_delta(self):
        with pytest.raises(SchemaError):
            masked_matrix([[1.0, 2.0]], [[OBSERVED, BELOW_LOD]], [[0.0, 0.0]])

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            MaskedMatrix(
                np.ones((2, 2)), np.zeros((2, 3), dtype=np.int8), np.zeros((2, 2)), ["a", "b"]
            )

    def test_sentinel_normalized(self):
        # garbage stored at masked cells must not be readable as data
        a = masked_matrix([[1.0, 123.0]], [[OBSERVED, MISSING]])
        b = masked_matrix([[1.0, -456.0]], [[OBSERVED, MISSING]])
        assert np.array_equal(a.values, b.values, equal_nan=True)
        assert np.isnan(a.values[0, 1])

    def test_immutable(self):
        X = observed_matrix([[1.0, 2.0]])
        with pytest.raises(ValueError):
            X.values[0, 0] = 5.0


class TestStandardize:
    def test_unit_sd_after_scaling(self):
        X = observed_matrix([[2.0, 1.0], [4.0, 2.0], [3.0, 5.0]])
        Y = standardize_columns(X)
        for j in range(2):
            assert np.std(Y.values[:, j], ddof=1) == pytest.approx(1.0, abs=1e-12)
        assert np.allclose(Y.scale, np.std(X.values, axis=0, ddof=1))

    def test_idempotent(self):
        rng = np.random.default_rng(5)
        X = observed_matrix(rng.random((20, 3)) + 0.5)
        once = standardize_columns(X)
        twice = standardize_columns(once)
        assert np.allclose(once.values, twice.values, atol=1e-12)

    def test_delta_divided_by_same_factor(self):
        # column sd over observed {1, 3, 5} is exactly 2
        values = [[1.0], [3.0], [5.0], [0.0]]
        status = [[OBSERVED], [OBSERVED], [OBSERVED], [BELOW_LOD]]
        delta = [[0.0], [0.0], [0.0], [1.0]]
        X = masked_matrix(values, status, delta)
        Y = standardize_columns(X)
        assert Y.delta[3, 0] == pytest.approx(0.5, abs=1e-15)
        assert Y.scale[0] == pytest.approx(2.0, abs=1e-15)

    def test_zero_variance_names_column(self):
        X = observed_matrix([[1.0, 2.0], [1.0, 3.0]], names=["flat", "ok"])
        with pytest.raises(DegenerateColumnError, match="flat"):
            standardize_columns(X)

    def test_too_few_observed(self):
        X = masked_matrix([[1.0], [2.0]], [[OBSERVED], [MISSING]])
        with pytest.raises(DegenerateColumnError):
            standardize_columns(X)
