"""End-to-end smoke tests for the Python bindings.

Runs the bundled normal scenario once per session and checks that the
exported artifacts are readable both through the bindings and through an
independent struct-based capture reader.
"""

import json
import os
import struct
from pathlib import Path

import pytest

import gridtrace

SOURCE_DIR = Path(os.environ.get("GT_SOURCE_DIR", Path(__file__).resolve().parents[2]))
CONFIGS = SOURCE_DIR / "configs"


@pytest.fixture(scope="session")
def normal_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("normal")
    art = gridtrace.run_scenario(str(CONFIGS / "normal.yaml"), str(out))
    return art


def test_run_exports_all_artifacts(normal_run):
    for key in ("pcap", "power_csv", "report", "summary", "manifest"):
        assert Path(normal_run[key]).is_file(), key
    assert normal_run["seed"] == 42
    manifest = json.loads(Path(normal_run["manifest"]).read_text())
    assert manifest["config_hash"] == normal_run["config_hash"]


def test_pcap_header_and_count_match_independent_reader(normal_run):
    raw = Path(normal_run["pcap"]).read_bytes()
    magic, vmaj, vmin, tz, sigfigs, snaplen, linktype = struct.unpack("<IHHiIII", raw[:24])
    assert magic == 0xA1B2C3D4
    assert (vmaj, vmin) == (2, 4)
    assert (tz, sigfigs) == (0, 0)
    assert snaplen == 65535
    assert linktype == 1  # ethernet

    count, off = 0, 24
    while off < len(raw):
        _, _, incl_len, orig_len = struct.unpack_from("<IIII", raw, off)
        assert incl_len == orig_len  # nothing is truncated at capture time
        off += 16 + incl_len
        count += 1
    assert off == len(raw)

    packets = gridtrace.parse_pcap(normal_run["pcap"])
    assert len(packets) == count > 0


def test_protocol_distribution_matches_the_normal_profile(normal_run):
    packets = gridtrace.parse_pcap(normal_run["pcap"])
    dist = gridtrace.protocol_distribution(packets)
    assert "SSH" not in dist  # benign runs carry no SSH at all
    assert dist["IEC104"]["count"] > 0
    assert dist["ARP"]["count"] > 0
    assert sum(row["fraction"] for row in dist.values()) == pytest.approx(1.0)


def test_traffic_analysis_helpers(normal_run):
    packets = gridtrace.parse_pcap(normal_run["pcap"])
    bins = gridtrace.packets_over_time(packets, interval_s=30.0, end_s=1200.0)
    assert len(bins) == 40
    assert sum(bins) == len(packets)

    matrix = gridtrace.connection_matrix(packets)
    ips = {ip for pair in matrix["bytes"] for ip in pair}
    assert ips == {"10.0.0.10", "10.0.0.11", "10.0.0.12"}
    assert matrix["arp_frames"] > 0


def test_power_report_shows_a_balanced_grid(normal_run):
    report = gridtrace.power_report(normal_run["power_csv"], 60.0)
    assert report["rows"] == 1200
    assert report["max_abs_sum_after"] <= 0.5  # one PV walk step of residual
    assert report["bss_constant_after"] is False  # the controller keeps acting


def test_validate_config_reports_errors(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("duration_s: -5\ntopology:\n  nodes: []\n")
    errors = gridtrace.validate_config(str(bad))
    assert errors
    assert any("duration" in path or "duration" in msg for path, msg in errors)

    with pytest.raises(ValueError):
        gridtrace.config_hash(str(bad))


def test_config_hash_is_stable(normal_run):
    path = str(CONFIGS / "normal.yaml")
    assert gridtrace.config_hash(path) == gridtrace.config_hash(path)
    assert gridtrace.config_hash(path) == normal_run["config_hash"]


def test_parse_pcap_rejects_foreign_files(tmp_path):
    junk = tmp_path / "junk.pcap"
    junk.write_bytes(b"\x00" * 64)
    with pytest.raises(ValueError):
        gridtrace.parse_pcap(str(junk))
