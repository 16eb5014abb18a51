# -*- coding: utf-8 -*-

from __future__ import absolute_import, unicode_literals

from prepinn.commands.prepinn import prepinn

if __name__ == "__main__":
    prepinn(prog_name="prepinn")
