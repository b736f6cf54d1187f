"""
Tests for the run-config loader
"""

import tempfile
from pathlib import Path

import numpy as np
import pytest

from adc_dgd.core.algorithms import Algorithm
from adc_dgd.core.compression import CompressorKind
from adc_dgd.core.config_loader import ConfigLoader, parse_config, parse_config_text, resolved_items
from adc_dgd.core.engine import RANDOM_QUADRATIC
from adc_dgd.utils.error_handling import ConfigError


STAR_CONFIG = """
# four-node star, explicit weights
topology = star
n = 4
matrix = explicit
algorithm = adc
gamma = 1.0
alpha = 0.02
eta = 1/2
K = 50
T = 2
seed = 3

[objective]
a = -4
b = 0
[objective]
a = 2
b = 0.2
[objective]
a = 2
b = -0.3
[objective]
a = 5
b = 0.1

[matrix]
row = 0.25, 0.25, 0.25, 0.25
row = 0.25, 0.75, 0, 0
row = 0.25, 0, 0.75, 0
row = 0.25, 0, 0, 0.75
"""


class TestConfigLoader:
    """Test cases for ConfigLoader"""

    def setup_method(self):
        self.loader = ConfigLoader()

    def test_full_config(self):
        cfg = self.loader.loads(STAR_CONFIG)
        assert cfg.topology.kind == "star"
        assert cfg.topology.n == 4
        assert cfg.algorithm is Algorithm.ADC
        assert cfg.eta == 0.5
        assert cfg.iters == 50
        assert cfg.trials == 2
        assert cfg.master_seed == 3
        assert cfg.matrix[1] == (0.25, 0.75, 0.0, 0.0)
        assert [o.a for o in cfg.objectives] == [-4.0, 2.0, 2.0, 5.0]
        assert cfg.consensus_matrix().beta == pytest.approx(0.75)

    def test_defaults(self):
        cfg = self.loader.loads("topology = ring\nn = 5\nalgorithm = dgd\n")
        assert cfg.matrix is None
        assert cfg.objectives == RANDOM_QUADRATIC
        assert cfg.compressor.kind is CompressorKind.ROUND
        assert cfg.alpha0 == 0.02
        assert cfg.gamma == 1.0
        assert cfg.iters == 1000
        assert cfg.trials == 1
        assert cfg.dim == 1

    def test_edges_topology(self):
        cfg = self.loader.loads("topology = edges\nn = 3\nedges = 0-1, 1-2\nalgorithm = dgd\n")
        assert cfg.topology.edges == ((0, 1), (1, 2))
        assert cfg.consensus_matrix().graph.degree(1) == 2

    def test_single_edge_is_a_list(self):
        cfg = self.loader.loads("topology = edges\nn = 2\nedges = 0-1\nalgorithm = dgd\n")
        assert cfg.topology.edges == ((0, 1),)

    def test_compressors(self):
        grid = self.loader.loads("topology = ring\nn = 3\nalgorithm = naive\ncompressor = grid\ndelta = 0.5\n")
        assert grid.compressor.delta == 0.5
        sparse = self.loader.loads(
            "topology = ring\nn = 3\nalgorithm = naive\ncompressor = sparsify\nlevels = 8\nbound = 4\n")
        assert sparse.compressor.levels == 8
        assert sparse.compressor.bound == 4.0

    def test_level_table(self):
        cfg = self.loader.loads("topology = ring\nn = 3\nalgorithm = adc\ncompressor = sparsify\n"
                                "level_table = 0, 0.5, 2, 4\n")
        assert cfg.compressor.table == (0.0, 0.5, 2.0, 4.0)
        assert cfg.compressor.levels == 3
        assert cfg.compressor.sigma2 == pytest.approx(4.0)

    def test_level_table_must_increase(self):
        with pytest.raises(ConfigError) as exc:
            self.loader.loads("topology = ring\nn = 3\nalgorithm = adc\ncompressor = sparsify\n"
                              "level_table = 0, 2, 1\n")
        assert exc.value.key == "compressor"

    def test_level_table_only_for_sparsifier(self):
        with pytest.raises(ConfigError):
            self.loader.loads("topology = ring\nn = 3\nalgorithm = adc\nlevel_table = 0, 1\n")

    def test_label_with_comma_stays_text(self):
        cfg = self.loader.loads("topology = ring\nn = 3\nalgorithm = dgd\nlabel = a, b\n")
        assert cfg.name == "a, b"

    def test_numeric_label_stays_text(self):
        cfg = self.loader.loads("topology = ring\nn = 3\nalgorithm = dgd\nlabel = 2024\n")
        assert cfg.name == "2024"

    def test_vector_centers(self):
        text = ("topology = path\nn = 2\nalgorithm = dgd\nP = 2\n"
                "[objective]\na = 1\nb = 1, 2\n[objective]\na = 1\nb = 0\n")
        cfg = self.loader.loads(text)
        objs = cfg.objective_set()
        assert np.array_equal(objs[0].b, [1.0, 2.0])
        assert np.array_equal(objs[1].b, [0.0, 0.0])

    def test_generator_block(self):
        cfg = self.loader.loads("topology = ring\nn = 3\nalgorithm = dgd\n[objective]\ngenerator = random_quadratic\n")
        assert cfg.objectives == RANDOM_QUADRATIC

    def test_unknown_key_reports_line(self):
        with pytest.raises(ConfigError) as exc:
            self.loader.loads("topology = ring\nn = 5\nalgorithm = dgd\nlearning_rate = 0.1\n", source="bad.cfg")
        assert exc.value.key == "learning_rate"
        assert exc.value.location.line == 4
        assert "bad.cfg" in str(exc.value)

    def test_missing_required(self):
        with pytest.raises(ConfigError) as exc:
            self.loader.loads("topology = ring\nn = 5\n")
        assert exc.value.key == "algorithm"

    def test_invalid_enum(self):
        with pytest.raises(ConfigError) as exc:
            self.loader.loads("topology = ring\nn = 5\nalgorithm = sgd\n")
        assert exc.value.key == "algorithm"
        assert exc.value.location.line == 3

    def test_duplicate_key(self):
        with pytest.raises(ConfigError) as exc:
            self.loader.loads("topology = ring\nn = 5\nn = 6\nalgorithm = dgd\n")
        assert exc.value.location.line == 3

    def test_missing_equals(self):
        with pytest.raises(ConfigError):
            self.loader.loads("topology ring\n")

    def test_unknown_section(self):
        with pytest.raises(ConfigError):
            self.loader.loads("topology = ring\nn = 3\nalgorithm = dgd\n[solver]\n")

    def test_objective_count_mismatch(self):
        text = "topology = path\nn = 2\nalgorithm = dgd\n[objective]\na = 1\nb = 0\n"
        with pytest.raises(ConfigError) as exc:
            self.loader.loads(text)
        assert exc.value.key == "objective"

    def test_objective_needs_center(self):
        text = "topology = path\nn = 2\nalgorithm = dgd\n[objective]\na = 1\n[objective]\na = 1\nb = 0\n"
        with pytest.raises(ConfigError):
            self.loader.loads(text)

    def test_bad_matrix_rejected(self):
        text = STAR_CONFIG.replace("row = 0.25, 0.75, 0, 0", "row = 0.25, 0.65, 0.1, 0")
        with pytest.raises(ConfigError) as exc:
            self.loader.loads(text)
        assert exc.value.key == "matrix"

    def test_explicit_needs_block(self):
        with pytest.raises(ConfigError) as exc:
            self.loader.loads("topology = ring\nn = 3\nalgorithm = dgd\nmatrix = explicit\n")
        assert exc.value.key == "matrix"

    def test_disconnected_edges(self):
        with pytest.raises(ConfigError) as exc:
            self.loader.loads("topology = edges\nn = 4\nedges = 0-1, 2-3\nalgorithm = dgd\n")
        assert exc.value.key == "edges"

    def test_small_ring(self):
        with pytest.raises(ConfigError) as exc:
            self.loader.loads("topology = ring\nn = 2\nalgorithm = dgd\n")
        assert exc.value.key == "n"

    def test_t_only_for_dgd_t(self):
        with pytest.raises(ConfigError) as exc:
            self.loader.loads("topology = ring\nn = 3\nalgorithm = dgd\nt = 3\n")
        assert exc.value.key == "t"

    def test_small_gamma_gate(self):
        text = "topology = ring\nn = 3\nalgorithm = adc\ngamma = 0.5\n"
        with pytest.raises(ConfigError) as exc:
            self.loader.loads(text)
        assert exc.value.key == "gamma"
        cfg = self.loader.loads(text + "allow_small_gamma = true\n")
        assert cfg.allow_small_gamma is True

    def test_inadmissible_step(self):
        text = STAR_CONFIG.replace("eta = 1/2", "eta = 0").replace("alpha = 0.02", "alpha = 0.2")
        with pytest.raises(ConfigError) as exc:
            self.loader.loads(text)
        assert exc.value.key == "alpha"

    def test_comments_and_blank_lines(self):
        cfg = self.loader.loads("\n# header\ntopology = ring   # inline\n\nn = 3\nalgorithm = dgd\n")
        assert cfg.topology.n == 3


class TestConfigFiles:
    """Test cases for loading from disk"""

    def test_parse_config_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "star.cfg"
            path.write_text(STAR_CONFIG)
            cfg = parse_config(path)
        assert cfg.topology.kind == "star"

    def test_missing_file(self):
        with pytest.raises(ConfigError):
            parse_config("/nonexistent/run.cfg")

    def test_resolved_items(self):
        cfg = parse_config_text(STAR_CONFIG)
        items = dict(resolved_items(cfg))
        assert items["matrix"] == "explicit"
        assert items["eta"] == "0.5"
        assert items["compressor"] == "round"
        assert items["label"] == "adc"
        assert items["objectives"].startswith("a=-4, b=0")
