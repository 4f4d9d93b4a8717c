"""From raw synthetic recordings to the 58-value feature vector.

One stressed and one relaxed subject are generated, smoothed and split into
band powers; the temporal theta power and the GSR statistics differ between
them in the way the generator plants.
"""
import numpy as np

from stressfusion.data_model import BANDS, Stress
from stressfusion.features import assemble_subject_features
from stressfusion.ingest import SynthSpec, generate_synthetic_subject
from stressfusion.preprocess import SgConfig, band_powers, savitzky_golay, screen_artifacts

subjects = {
    cls: generate_synthetic_subject(SynthSpec(seed=21, planted_class=cls, duration_seconds=60.0))
    for cls in (Stress.NON_STRESSED, Stress.STRESSED)
}

# %% smoothing leaves the slow GSR shape intact
rec = subjects[Stress.STRESSED]
smooth = savitzky_golay(rec.gsr, SgConfig(11, 3))
print("GSR raw sd %.3f kOhm, smoothed sd %.3f kOhm" % (rec.gsr.samples.std(), smooth.samples.std()))

# %% artifact screening, then band power per 256-sample window
for cls, rec in subjects.items():
    clean, rejected = screen_artifacts(rec.eeg)
    bp = band_powers(clean)
    mean = bp.mean_power()
    print(f"\n{cls.value}: PSS {rec.pss_score}, {rejected.sum()} of {rejected.size} epochs rejected, "
          f"{bp.n_windows} windows")
    print("          " + "".join(f"{b.short:>10}" for b in BANDS))
    for i, ch in enumerate(bp.channel_names):
        print(f"{ch:>8}  " + "".join(f"{v:>10.1f}" for v in mean[i]))

# %% the assembled feature vector
fv = {cls: assemble_subject_features(rec) for cls, rec in subjects.items()}
names = ["Pmean:EEG:theta:TP9", "Pmean:EEG:theta:TP10", "DASM:EEG:theta:TP9-TP10",
         "SdMar:GSR:-:-", "Var:GSR:-:-", "SdMar:PPG:-:-"]
print(f"\n{'feature':<26}{'relaxed':>14}{'stressed':>14}")
for n in names:
    print(f"{n:<26}{fv[Stress.NON_STRESSED][n]:>14.4f}{fv[Stress.STRESSED][n]:>14.4f}")
print(f"\n{len(fv[Stress.STRESSED])} features per subject; all finite:",
      bool(np.all(np.isfinite(fv[Stress.STRESSED].values))))
