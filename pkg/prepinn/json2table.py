# -*- coding: utf-8 -*-

import re
import shutil
import sys

from .utils import remove_ansi_escape


class Table:
    """
    Plain-text table. `table_def` is a list of column definitions with `name`, `value`
    (a `{field}` placeholder, dotted paths allowed) and optional `format`, `justify` and `mlen`.
    """

    def __init__(self, table_def):
        self.table_def = [dict(c) for c in table_def]
        self.data = []

    def format_item(self, cdef, value, skipformat=False, entry=None, adjust=True):
        if cdef.get("format") and not skipformat:
            try:
                v = str(cdef["format"](cdef, value, entry))
            except Exception:
                v = "E!"
        else:
            v = str(value) if value is not None else "-"

        asize = 0
        if adjust and cdef.get("_len"):
            asize = cdef["_len"] + 2
        if cdef.get("mlen") and len(remove_ansi_escape(v)) > cdef["mlen"]:
            v = v[: cdef["mlen"] - 1] + "…"

        pad = " " * max(0, asize - len(remove_ansi_escape(v)))
        if cdef.get("justify") == "right":
            return pad + v
        return v + pad

    def get_field(self, field_name, data):
        d = data
        for f in field_name.split("."):
            try:
                d = d.get(f)
            except AttributeError:
                return None
        return d

    def eval_value(self, value, data):
        if not value:
            return None
        params = list(set(re.findall(r"\{[a-zA-Z0-9_\-\.]+\}", value)))
        if len(params) == 1 and params[0] == value:
            return self.get_field(value[1:-1], data)
        val = value
        for k in params:
            val = val.replace(k, str(self.get_field(k[1:-1], data)))
        return val

    def calc_col_sizes(self):
        for cdef in self.table_def:
            cdef["_len"] = len(cdef["name"])
            for e in self.data:
                text = self.format_item(cdef, self.eval_value(cdef.get("value"), e), entry=e, adjust=False)
                cdef["_len"] = max(cdef["_len"], len(remove_ansi_escape(text)))
            if cdef.get("mlen") is not None:
                cdef["_len"] = min(cdef["_len"], cdef["mlen"])

    def lines(self, data):
        self.data = data
        self.calc_col_sizes()
        header = "".join(self.format_item(c, c["name"], skipformat=True) for c in self.table_def)
        rows = [
            "".join(
                self.format_item(c, self.eval_value(c.get("value"), e), entry=e) for c in self.table_def
            )
            for e in self.data
        ]
        return [header.rstrip()] + [r.rstrip() for r in rows]

    def display(self, data, noterm=False):
        cols = 100000 if noterm or not sys.stdout.isatty() else shutil.get_terminal_size().columns
        lines = self.lines(data)
        for line in lines:
            sys.stdout.write("%s\n" % line[0:cols])
        return len(lines)
