"""
Causal World Model
GridWorld simulator, language-annotated interventions, causal representation
learning, causal-variable decoding and MCTS planning over the learned model
"""
__version__ = "1.0.1"
