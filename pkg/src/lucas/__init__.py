"""Stepwise mathematics problem-solving engine.

Layers: typed terms (`terms`), rewriting (`rewrite`), knowledge base
(`knowledge`), problem specifications (`specification`), tactic programs
(`program`), the step interpreter (`interpreter`), dialogue policy
(`dialogue`), session service (`service`) and batch CLI (`cli`).
"""

__version__ = "0.1.0"
