"""Program synthesis from reward over a Karel gridworld.

Two stages: learn a latent embedding space over randomly generated DSL
programs, then search that space with the cross-entropy method to find
programs that maximize task reward.
"""

__version__ = "0.1.0"
