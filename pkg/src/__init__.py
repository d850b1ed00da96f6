"""ybxsim: Yang-Baxter interferometry and NMR pulse simulation."""
