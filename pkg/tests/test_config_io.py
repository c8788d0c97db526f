import os
import threading

import pytest

from nleit.config import RunConfig, load_config, parse_config
from nleit.errors import ConfigError
from nleit.io import atomic_write_text, csv_text, format_value, write_csv


def test_empty_config_is_defaults():
    assert parse_config("") == RunConfig()


def test_values_and_comments():
    cfg = parse_config(
        """
# leading comment
[atomic]
isotope = Rb85   # inline
temperature = 320
[tomography]
seed = 99
"""
    )
    assert cfg.atomic.isotope == "Rb85"
    assert cfg.atomic.temperature == 320.0
    assert cfg.tomography.seed == 99


def test_unknown_key_strict_reports_line_and_key():
    text = "[probe]\ndetuning_hz = 1e6\nbogus = 3\n"
    with pytest.raises(ConfigError) as info:
        parse_config(text, strict=True)
    assert info.value.line == 3
    assert info.value.key == "probe.bogus"
    assert "line 3" in str(info.value)


def test_unknown_section_lenient_warns():
    with pytest.warns(UserWarning, match="unknown section"):
        cfg = parse_config("[extras]\nx = 1\n")
    assert cfg == RunConfig()
    with pytest.raises(ConfigError):
        parse_config("[extras]\nx = 1\n", strict=True)


def test_bad_value_diagnostic():
    with pytest.raises(ConfigError) as info:
        parse_config("[comb]\n\nspan_hz = wide\n")
    assert info.value.line == 3 and info.value.key == "comb.span_hz"


def test_validation_errors():
    with pytest.raises(ConfigError, match="efficiency"):
        parse_config("[quantum]\nefficiency = 1.5\n")
    with pytest.raises(ConfigError):
        parse_config("[atomic]\nisotope = Cs133\n")
    with pytest.raises(ConfigError):
        parse_config("[spectrum]\nscan_start_hz = 1\nscan_stop_hz = 0\n")


def test_syntax_error():
    with pytest.raises(ConfigError, match="syntax"):
        parse_config("no section here = 1\n")


def test_shipped_configs_parse_strictly():
    root = os.path.join(os.path.dirname(__file__), "..", "configs")
    names = sorted(f for f in os.listdir(root) if f.endswith(".ini"))
    assert names
    for name in names:
        load_config(os.path.join(root, name), strict=True)


def test_format_value():
    assert format_value(True) == "true"
    assert format_value(3) == "3"
    assert format_value(0.1) == "0.10000000000000001"
    assert float(format_value(1 / 3)) == 1 / 3


def test_csv_text():
    assert csv_text(["a", "b"], []) == "a,b\n"
    assert csv_text(["a", "b"], [(1, 2.5)]) == "a,b\n1,2.5\n"
    with pytest.raises(ValueError):
        csv_text(["a"], [(1, 2)])


def test_atomic_write(tmp_path):
    target = tmp_path / "sub" / "f.csv"
    write_csv(target, ["x"], [(1,)])
    assert target.read_text() == "x\n1\n"
    atomic_write_text(target, "new\n")
    assert target.read_text() == "new\n"
    assert [p.name for p in target.parent.iterdir()] == ["f.csv"]


def test_atomic_write_concurrent_directories(tmp_path):
    def job(i):
        for _ in range(20):
            atomic_write_text(tmp_path / f"d{i}" / "out.txt", f"{i}\n" * 1000)

    threads = [threading.Thread(target=job, args=(i,)) for i in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    for i in range(4):
        assert (tmp_path / f"d{i}" / "out.txt").read_text() == f"{i}\n" * 1000
