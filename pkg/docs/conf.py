# Configuration file for the Sphinx documentation builder.
#
# For the full list of built-in configuration values, see the documentation:
# https://www.sphinx-doc.org/en/master/usage/configuration.html

# -- Project information -----------------------------------------------------
# https://www.sphinx-doc.org/en/master/usage/configuration.html#project-information

import os
import re
from typing import Any, Dict

project = 'prepinn'
copyright = '2026, prepinn developers'
author = 'prepinn developers'

# determine the version of prepinn
try:
    version_file = os.path.join(os.path.realpath(os.path.dirname(__file__) + "/.."), 'prepinn', '__init__.py')
    __version__ = re.search(r'__version__\s+=\s+\"([0-9\.a-z]+)\"', open(version_file).read()).group(1)
    print(f"prepinn version is {__version__}")
except Exception as e:
    raise Exception(f"Cannot determine the prepinn version from {version_file}. {str(e)}")

release = __version__

# -- General configuration ---------------------------------------------------
# https://www.sphinx-doc.org/en/master/usage/configuration.html#general-configuration

extensions = ['myst_parser', 'sphinx.ext.autosectionlabel', 'sphinx_copybutton']

copybutton_only_copy_prompt_lines = True
copybutton_prompt_text = "$ "

templates_path = ['_templates']
exclude_patterns = ['_build', 'Thumbs.db', '.DS_Store']

myst_heading_anchors = 2
autosectionlabel_prefix_document = True

highlight_language = 'yaml'

# -- Options for HTML output -------------------------------------------------
# https://www.sphinx-doc.org/en/master/usage/configuration.html#options-for-html-output

html_theme = "furo"
html_title = f"prepinn v{__version__}"
language = "en"

html_theme_options: Dict[str, Any] = {
    "source_directory": "docs/",
}
