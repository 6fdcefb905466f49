from src.Hawkes.samplers.AdaptiveSampler import AdaptiveMetropolisSampler, run_chain, run_chains

__all__ = ["AdaptiveMetropolisSampler", "run_chain", "run_chains"]
