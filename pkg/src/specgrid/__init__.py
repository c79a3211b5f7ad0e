"""specgrid: multi-agent wireless power/frequency control with a from-scratch
DQN stack, federated model averaging, and a multi-network generalization
training protocol."""

__version__ = "0.1.0"
