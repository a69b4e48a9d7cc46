"""Print the rank bounds and guide positions for a list of systems."""
import sys

from pptrank.charts import Guides
from pptrank.hilbert import BipartiteDims

for text in sys.argv[1:] or ["2x2", "2x3", "2x4", "3x3", "3x4", "4x4"]:
    g = Guides.for_dims(BipartiteDims.parse(text))
    print(f"{text}: hlvc={g.hlvc} conjecture={g.conjecture} "
          f"arc m^2+n^2={g.arc_radius_sq} criterion m+n={g.criterion_sum}")
