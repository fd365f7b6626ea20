"""loopwm: a desk-scale closed-loop plan/generate/critique harness.

Subpackages:
    numerics    float64 MLP, Adam, Gaussian log-densities, splittable RNG
    microworld  symbolic domains, frame encoding, demonstration segments
    planner     breadth-first symbolic planning and replanning
    critic      programmatic segment scoring and a pairwise reward model
    worldmodel  conditional flow model, ODE/SDE samplers, flow-matching SFT
    loop        episode engine with inner retries and outer replanning
    grpo        group-relative policy optimization over denoise trajectories
    bench       task suites, evaluation metrics, comparisons, curves
    gateway     wire schemas, remote backends, scripted mock server
"""

__version__ = "0.1.0"
