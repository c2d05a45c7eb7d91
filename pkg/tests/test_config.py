import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hlslab.config import ConfigError, parse_config, parse_config_text
from hlslab.integrator import ShotOptions
from hlslab.io import config_digest
from hlslab.regimes import PowerPair, lane_emden


def test_minimal_config_defaults():
    cfg = parse_config_text('n = 3\np = 2.0\nq = 2.0\nkind = "lane-emden"\n')
    assert cfg.system() == lane_emden(3, PowerPair(2.0, 2.0))
    assert cfg.shot == ShotOptions()
    d = cfg.to_dict()
    assert d["shot"]["rtol"] == 1e-10 and d["shot"]["r_max"] == 1e4
    assert "jobs" not in d["search"]


def test_parse_config_from_file(tmp_path):
    path = tmp_path / "c.toml"
    path.write_text('kind = "scalar"\nn = 3\np = 5.0\n[shot]\nr_max = 1e9\n')
    cfg = parse_config(path)
    assert cfg.shot.r_max == 1e9 and cfg.system().L == 1


def test_pq_requirement_named():
    with pytest.raises(ConfigError, match="pq>1") as info:
        parse_config_text("n = 3\np = 1.0\nq = 1.0\n", require_pq=True)
    assert info.value.key == "p" and info.value.line == 2
    parse_config_text("n = 3\np = 1.0\nq = 1.0\n")  # fine when not required


def test_n_le_2k_rejected():
    with pytest.raises(ConfigError, match="n > 2k") as info:
        parse_config_text('kind = "cascade"\nn = 3\nk = 2\np = 2.0\nq = 2.0\n')
    assert info.value.key == "k"


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError, match="unknown key") as info:
        parse_config_text("n = 3\np = 2.0\nq = 2.0\nfoo = 1\n")
    assert info.value.key == "foo" and info.value.line == 4
    with pytest.raises(ConfigError, match="shot.bogus"):
        parse_config_text("n = 3\np = 2.0\nq = 2.0\n[shot]\nbogus = 1\n")


def test_syntax_error_has_line():
    with pytest.raises(ConfigError) as info:
        parse_config_text("n = 3\np = 2.0\nq = \n")
    assert info.value.line == 3


def test_bad_values_name_key():
    with pytest.raises(ConfigError) as info:
        parse_config_text("n = 3\np = -2.0\nq = 2.0\n")
    assert info.value.key == "p"
    with pytest.raises(ConfigError) as info:
        parse_config_text("n = 3.5\np = 2.0\nq = 2.0\n")
    assert info.value.key == "n"
    with pytest.raises(ConfigError) as info:
        parse_config_text('kind = "other"\nn = 3\n')
    assert info.value.key == "kind"
    with pytest.raises(ConfigError) as info:
        parse_config_text("n = 3\np = 2.0\nq = 2.0\nL = 3\n")
    assert info.value.key == "L"
    with pytest.raises(ConfigError, match=r"\[shot\]"):
        parse_config_text("n = 3\np = 2.0\nq = 2.0\n[shot]\nrtol = -1.0\n")


def test_custom_rhs():
    text = ('kind = "custom"\nn = 3\n'
            'rhs = [[{coeff = 1.0, exponents = [0, 2]}], [{coeff = 1.0, exponents = [2, 0]}]]\n')
    cfg = parse_config_text(text)
    assert cfg.system().exponent_matrix().tolist() == [[0.0, 2.0], [2.0, 0.0]]
    with pytest.raises(ConfigError) as info:
        parse_config_text('kind = "custom"\nn = 3\nrhs = [[{coeff = 1.0}]]\n')
    assert info.value.key == "rhs"


def test_digest_stable_under_key_order():
    a = parse_config_text("n = 3\np = 2.0\nq = 2.0\nseed = 4\n[shot]\nrtol = 1e-9\nr_max = 50.0\n")
    b = parse_config_text("seed = 4\nq = 2.0\np = 2.0\nn = 3\n[shot]\nr_max = 50.0\nrtol = 1e-9\n")
    assert config_digest(a.to_dict()) == config_digest(b.to_dict())


def test_digest_changes_with_semantics():
    a = parse_config_text("n = 3\np = 2.0\nq = 2.0\n")
    b = parse_config_text("n = 3\np = 2.0\nq = 2.5\n")
    c = parse_config_text("n = 3\np = 2.0\nq = 2.0\n[search]\njobs = 4\n")
    assert config_digest(a.to_dict()) != config_digest(b.to_dict())
    # worker count is not semantic
    assert config_digest(a.to_dict()) == config_digest(c.to_dict())


@given(d=st.dictionaries(st.text(min_size=1, max_size=5), st.integers(), max_size=6))
@settings(max_examples=50, deadline=None)
def test_digest_ignores_insertion_order(d):
    rev = dict(reversed(list(d.items())))
    assert config_digest(d) == config_digest(rev)
