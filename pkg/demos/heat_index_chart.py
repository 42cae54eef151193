"""
Heat index and wind chill at a glance
=====================================

Prints a slice of the heat-index chart, the comfort band of each cell and
a few wind-chill values.
"""

import numpy as np

from transitheat.thermal import ApparentTemp, Branch, WeatherSample, apparent_temperature, comfort_class, heat_index
from transitheat.thermal import wind_chill

temps = np.arange(80, 111, 5)
humidity = np.arange(40, 101, 10)

# rows are air temperature, columns relative humidity
print("T\\RH " + "".join(f"{rh:>6d}" for rh in humidity))
for t in temps:
    print(f"{t:4d} " + "".join(f"{heat_index(t, rh):6.0f}" for rh in humidity))

###############################################################################
# The same grid, classified into comfort bands.

short = {"Safe": ".", "Caution": "c", "ExtremeCaution": "C", "Danger": "D", "ExtremeDanger": "X"}
for t in temps:
    cells = [comfort_class(ApparentTemp(float(heat_index(t, rh)), Branch.HEAT_INDEX)).value for rh in humidity]
    print(f"{t:4d} " + "".join(f"{short[c]:>6s}" for c in cells))

###############################################################################
# Cold side: wind chill only applies at or below 50 F with wind above 3 mph.

for t, v in [(40, 5), (30, 20), (0, 15), (50, 2)]:
    a = apparent_temperature(WeatherSample(t, 50, v))
    print(f"{t:4d} F, {v:2d} mph -> {wind_chill(t, v):6.1f} F  ({a.branch.value})")
