# -*- coding: utf-8 -*-
#
# datalad_xsdist documentation build configuration file
#
# This file is execfile()d with the current directory set to its
# containing dir.

import datetime

import datalad_xsdist

# -- General configuration ------------------------------------------------

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.autosummary',
    'sphinx_copybutton',
    'sphinx.ext.doctest',
    'sphinx.ext.intersphinx',
    'sphinx.ext.mathjax',
    'sphinx.ext.viewcode',
    'sphinx.ext.napoleon',
]

# for the module reference
autosummary_generate = True

source_suffix = '.rst'
master_doc = 'index'

project = u'Datalad X-ray Sobolev Distance Extension'
copyright = u'2023-{}, DataLad team'.format(datetime.datetime.now().year)
author = u'DataLad team'

version = datalad_xsdist.__version__
release = version

language = 'en'
exclude_patterns = []
pygments_style = 'sphinx'

# numpy style docstrings throughout
napoleon_numpy_docstring = True
napoleon_google_docstring = False

intersphinx_mapping = {
    'numpy': ('https://numpy.org/doc/stable/', None),
    'scipy': ('https://docs.scipy.org/doc/scipy/', None),
}

# -- Options for HTML output ----------------------------------------------

html_theme = 'sphinx_rtd_theme'
html_split_index = True
html_show_sourcelink = False
smartquotes = False
