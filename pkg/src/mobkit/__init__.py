"""Country-level mobility metrics from raw smartphone location records.

The pipeline turns observation CSVs (device, lat/lon, positional uncertainty,
local timestamp) into per-country daily series of two metrics: the average
distance travelled per person (km) and the share of stationary people. On top
of the daily series it provides trailing-window smoothing, stratified bootstrap
confidence intervals, correlation against external mobility indices, a beta
regression of correlation strength on data penetration, a parameter
sensitivity sweep, and a synthetic trajectory generator with known ground
truth for validation.
"""

__version__ = "0.1.0"
