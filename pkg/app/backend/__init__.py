# Spline-Diff backend package
