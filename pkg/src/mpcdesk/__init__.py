"""mpcdesk: sampling- and derivative-based predictive control with a live cockpit.

Core pieces: small smooth dynamics models, a residual-based objective
with an exponential risk transform, spline-parameterized control plans,
three interchangeable planners (random search, first-order with an
adjoint sweep, Gauss-Newton dynamic programming), and an asynchronous
agent that keeps simulating while the planner replans in the background.
"""

__version__ = "0.1.0"
