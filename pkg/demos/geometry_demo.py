"""Resampling, Chamfer distance and BEV clipping on a toy polyline."""
import numpy as np

from mapcomp.geometry import BevRange, MapClass, MapElement, chamfer, clip_polyline, resample

arc = np.column_stack([np.linspace(-40, 40, 9), 5 * np.sin(np.linspace(0, np.pi, 9))])
elem = MapElement("arc", MapClass.BOUNDARY, np.column_stack([arc, np.zeros(9)]))

even = resample(elem, 20)
steps = np.linalg.norm(np.diff(even.xy, axis=0), axis=1)
print(f"20 resampled points, chord spread {steps.max() - steps.min():.2e} m")

shifted = even.xy + np.array([0.0, 0.3])
print(f"chamfer to a copy shifted by 0.3 m: {chamfer(even.xy, shifted):.3f}")

pieces = clip_polyline(elem.points, BevRange())
print(f"clipped to the default range: {len(pieces)} piece(s), "
      f"x in [{pieces[0][:, 0].min():.1f}, {pieces[0][:, 0].max():.1f}]")
