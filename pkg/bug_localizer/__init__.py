"""
bug_localizer - Information-retrieval bug localization.

Ranks the source files of a project by their suspiciousness for a new bug
report. Three evidence sources are combined: files fixed for similar, earlier
issues (trace score), files touched by recent bug-fixing commits (bug cache)
and structured retrieval over identifiers and comments (code structure).
History and code structure only see commits and files dated before the bug
report was filed. Trace evidence does too under the strict cut-off; the
default relaxed cut-off also admits issues resolved while the bug was open.
"""

__version__ = "1.0.0"
