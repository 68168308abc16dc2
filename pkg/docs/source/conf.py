# Configuration file for the Sphinx documentation builder.
# http://www.sphinx-doc.org/en/master/config

import os
import sys

sys.path.insert(0, os.path.abspath("../.."))

from panopyr import __version__

project = "panopyr"
copyright = "2021, Jiachen Yao"
author = "Jiachen Yao"
version = __version__
release = __version__

extensions = [
    "sphinx.ext.autodoc",
    "sphinx.ext.napoleon",
    "sphinx.ext.mathjax",
    "sphinx_rtd_theme",
    "m2r2",
]
templates_path = ["_templates"]
source_suffix = [".rst", ".md"]
master_doc = "index"
language = None
exclude_patterns = []
pygments_style = "sphinx"

autodoc_member_order = "bysource"
napoleon_google_docstring = True
napoleon_numpy_docstring = False

html_theme = "sphinx_rtd_theme"
html_static_path = ["_static"]
htmlhelp_basename = "panopyrdoc"

latex_documents = [
    (master_doc, "panopyr.tex", "panopyr Documentation", author, "manual"),
]
man_pages = [(master_doc, "panopyr", "panopyr Documentation", [author], 1)]
texinfo_documents = [
    (
        master_doc,
        "panopyr",
        "panopyr Documentation",
        author,
        "panopyr",
        "Bottom-up panoptic segmentation with pyramidal fusion.",
        "Miscellaneous",
    ),
]
