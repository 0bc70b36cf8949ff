"""Population dynamics on both sides of the transition.

A zero-initialised population at <c> = 3 freezes into a glassy state with
large Edwards-Anderson overlap and a local/global energy gap, while at
<c> = 3.9 it relaxes to the symmetric state. A damage-spreading pair makes
the same contrast dynamically. N = 2000 keeps this under half a minute; the
acceptance suite repeats it at N = 10^4.
"""
import numpy as np

from colourdiv.analysis import damage_final, steady_state

for mc in (3.0, 3.9):
    st = steady_state(mc, init="zero", samples=2, N=2000, seed=3, test_nodes=2000)
    gap = st.mean("e_av_local") - st.mean("e_av_global")
    print(f"<c>={mc}: F={st.mean('f_av'):+.4f} (3c-5={3 * mc - 5:+.2f})  "
          f"q_EA={st.mean('q_ea'):.3f}  e_loc-e_glob={gap:+.4f}  f_incom={st.mean('f_incom'):.4f}")
    if mc == 3.0:
        centres = (np.arange(len(st.histogram)) + 0.5) / len(st.histogram)
        top = np.argsort(st.histogram)[::-1][:6]
        print("  tallest histogram bins at moments", np.round(np.sort(centres[top]), 3).tolist())

for mc in (3.0, 3.9):
    d = damage_final(mc, samples=2, N=2000, seed=7, sweeps=40, tail=10, test_nodes=2000)
    print(f"damage distance after 40 sweeps at <c>={mc}: {d.mean():.3f}")
