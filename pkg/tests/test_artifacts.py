# -*- coding: utf-8 -*-

import os

import pytest

from prepinn.components.artifacts import ArtifactException, StagingDirectory, csv_text


def test_csv_text():
    text = csv_text(("epoch", "loss", "tag"), [(0, 0.1, "a"), (10, 0.5, "b")])
    assert text == "epoch,loss,tag\n0,0.10000000000000001,a\n10,0.5,b\n"
    assert csv_text(("x",), []) == "x\n"


def test_staging_commits_on_success(tmp_path):
    out = tmp_path / "run"
    with StagingDirectory(str(out)) as staging:
        staging.write("a.csv", "x\n1\n")
        staging.write("b.bin", b"\x00\x01")
        assert not (out / "a.csv").exists()
        assert os.path.dirname(staging.path) == str(out)
    assert sorted(os.listdir(out)) == ["a.csv", "b.bin"]
    assert (out / "b.bin").read_bytes() == b"\x00\x01"


def test_staging_discards_on_failure(tmp_path):
    out = tmp_path / "run"
    with pytest.raises(RuntimeError):
        with StagingDirectory(str(out)) as staging:
            staging.write("a.csv", "x\n")
            raise RuntimeError("interrupted")
    assert os.listdir(out) == []


def test_unwritable_directory(tmp_path):
    (tmp_path / "file").write_text("")
    with pytest.raises(ArtifactException):
        with StagingDirectory(str(tmp_path / "file" / "run")):
            pass


def test_staging_replaces_files_one_by_one(tmp_path):
    out = tmp_path / "run"
    out.mkdir()
    (out / "a.csv").write_text("old\n")
    (out / "keep.txt").write_text("kept\n")
    with StagingDirectory(str(out)) as staging:
        staging.write("a.csv", "new\n")
    assert (out / "a.csv").read_text() == "new\n"
    assert (out / "keep.txt").read_text() == "kept\n"
    assert sorted(os.listdir(out)) == ["a.csv", "keep.txt"]
