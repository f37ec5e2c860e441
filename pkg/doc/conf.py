# -*- coding: utf-8 -*-
#
# freenoise documentation build configuration file.
#
# This file is execfile()d with the current directory set to its
# containing dir.

import os
import sys

from sphinx_gallery.sorting import FileNameSortKey

sys.path.insert(0, os.path.abspath('..'))
import freenoise  # noqa: E402

# -- General configuration ------------------------------------------------

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.autosummary',
    'sphinx.ext.intersphinx',
    'sphinx.ext.mathjax',
    'sphinx.ext.viewcode',
    'numpydoc',
    'sphinx_gallery.gen_gallery',
]

autosummary_generate = True
numpydoc_show_class_members = False

# Sphinx-gallery
sphinx_gallery_conf = {
    # path to your examples scripts
    'examples_dirs': '../tutorials',
    # path where to save gallery generated examples
    'gallery_dirs': '_auto_examples',
    # which files to execute? only those with "plot_"
    'filename_pattern': 'plot_',
    'within_subsection_order': FileNameSortKey,
    'remove_config_comments': 'True',
    'plot_gallery': 'True',
    'thumbnail_size': (480, 250),
}

# The suffix(es) of source filenames.
source_suffix = '.rst'

# The main toctree document.
main_doc = 'index'

# General information about the project.
project = u'freenoise'
copyright = u'2026, the freenoise developers'
author = u'the freenoise developers'

# The short X.Y version.
version = '.'.join(freenoise.__version__.split('.')[:2])
# The full version, including alpha/beta/rc tags.
release = freenoise.__version__

language = "en"

# List of patterns, relative to source directory, that match files and
# directories to ignore when looking for source files.
exclude_patterns = ['_build', 'Thumbs.db', '.DS_Store']

# The name of the Pygments (syntax highlighting) style to use.
pygments_style = 'sphinx'

# -- Options for HTML output ----------------------------------------------

html_theme = 'alabaster'

html_theme_options = {
    'page_width': '1200px',
    'sidebar_width': '235px',
    'description': 'Long video sampling with rescheduled noise',
    'fixed_sidebar': 'True',
}

# This is required for the alabaster theme
# refs: http://alabaster.readthedocs.io/en/latest/installation.html#sidebars
html_sidebars = {
    '**': [
        'about.html',
        'relations.html',  # needs 'show_related': True theme option to display
        'navigation.html',
        'searchbox.html',
    ]
}

# Output file base name for HTML help builder.
htmlhelp_basename = 'freenoisedoc'

# -- Options for LaTeX output ---------------------------------------------

latex_documents = [
    (main_doc, 'freenoise.tex', u'freenoise Documentation', author,
     'manual'),
]

# -- Options for manual page output ---------------------------------------

man_pages = [(main_doc, 'freenoise', u'freenoise Documentation', [author],
              1)]

intersphinx_mapping = {
    'python': ('https://docs.python.org/3', None),
    'numpy': ('https://numpy.org/doc/stable/', None),
    'sklearn': ('https://scikit-learn.org/stable/', None),
}
