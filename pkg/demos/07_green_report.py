"""
What did that run cost?
=======================

Energy and emissions from three numbers: wall hours, average draw in
watts, and a regional grid intensity in grams of CO2 per kWh. The
default factor is 324 g/kWh (Irish grid).
"""

from nmtforge.green import green_report

# a long training run on a single 320 W accelerator
report = green_report(hours=95.3, watts=320.0)
print("%.1f h at %.0f W" % (report.hours, report.watts))
print("  energy   : %.3f kWh" % report.kwh)
print("  emissions: %.6f kgCO2 (%s grid)" % (report.kgco2, report.region))

# a shorter job at a different draw
print("10 h at 300 W ->", green_report(hours=10.0, watts=300.0).kgco2, "kgCO2")

# other grids plug in as a factor
fr = green_report(hours=95.3, watts=320.0, factor_g_per_kwh=56.0, region="FR")
print("same run on a 56 g/kWh grid: %.3f kgCO2" % fr.kgco2)

# the arithmetic is one multiplication chain, so reports are exactly
# reproducible: watts x hours / 1000 -> kWh, kWh x factor / 1000 -> kg
assert green_report(hours=10.0, watts=300.0).kgco2 == 0.972
