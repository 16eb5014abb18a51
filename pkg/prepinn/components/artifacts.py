# -*- coding: utf-8 -*-

from __future__ import absolute_import, unicode_literals

import logging
import os
import shutil
import tempfile

from prepinn.utils import PrepinnException, format_float

log = logging.getLogger("run")


class ArtifactException(PrepinnException):
    pass


def csv_text(header, rows):
    """
    CSV with a header line; float cells are formatted with 17 significant digits.
    """
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(c if isinstance(c, str) else (str(c) if isinstance(c, int) else format_float(c)) for c in row))
    return "\n".join(lines) + "\n"


class StagingDirectory:
    """
    Collects the files of one run in a hidden directory inside `out_dir` and moves them
    into `out_dir` on `commit`. On failure the staging directory is removed and no
    file of the run appears in `out_dir`.
    """

    def __init__(self, out_dir):
        self.out_dir = out_dir
        self.path = None
        self.files = []

    def __enter__(self):
        try:
            os.makedirs(self.out_dir, exist_ok=True)
            self.path = tempfile.mkdtemp(dir=self.out_dir, prefix=".staging-")
        except OSError as e:
            raise ArtifactException(f"The output directory {self.out_dir} is not writable: {e.strerror}")
        return self

    def file(self, name):
        self.files.append(name)
        return os.path.join(self.path, name)

    def write(self, name, content):
        p = self.file(name)
        mode = "wb" if isinstance(content, (bytes, bytearray)) else "w"
        with open(p, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": "\n"})) as f:
            f.write(content)
        return p

    def commit(self):
        for name in self.files:
            os.replace(os.path.join(self.path, name), os.path.join(self.out_dir, name))
        log.debug(f"Committed {len(self.files)} file(s) to {self.out_dir}.")

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            self.commit()
        shutil.rmtree(self.path, ignore_errors=True)
        return False
