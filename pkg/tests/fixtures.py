"""Frozen reference values.

TABLE2 holds every (sensitivity, specificity, BAC) triple of the published
method comparison, keyed by (dataset, method, noise). LOW_NOISE_COUNTS and
HIGH_NOISE_COUNTS are the baseline test-split confusion counts on the
dermatology set at 0% and 40% noise (392 positives, 1613 negatives).
"""

TABLE2 = {
    ("derma", "Baseline", 0.0): (0.709, 0.874, 0.791),
    ("derma", "Baseline", 0.2): (0.686, 0.769, 0.728),
    ("derma", "Baseline", 0.4): (0.849, 0.436, 0.643),
    ("derma", "Baseline+CS", 0.0): (0.852, 0.758, 0.805),
    ("derma", "Baseline+CS", 0.2): (0.599, 0.712, 0.656),
    ("derma", "Baseline+CS", 0.4): (0.640, 0.469, 0.554),
    ("derma", "GMM Filter", 0.0): (0.758, 0.818, 0.788),
    ("derma", "GMM Filter", 0.2): (0.758, 0.711, 0.734),
    ("derma", "GMM Filter", 0.4): (0.760, 0.591, 0.676),
    ("derma", "GMM Filter+CS", 0.0): (0.811, 0.795, 0.803),
    ("derma", "GMM Filter+CS", 0.2): (0.755, 0.604, 0.679),
    ("derma", "GMM Filter+CS", 0.4): (0.730, 0.359, 0.544),
    ("derma", "Co-teaching", 0.0): (0.755, 0.846, 0.800),
    ("derma", "Co-teaching", 0.2): (0.617, 0.857, 0.737),
    ("derma", "Co-teaching", 0.4): (0.508, 0.793, 0.650),
    ("derma", "Co-teaching+CS", 0.0): (0.791, 0.821, 0.806),
    ("derma", "Co-teaching+CS", 0.2): (0.783, 0.737, 0.760),
    ("derma", "Co-teaching+CS", 0.4): (0.934, 0.464, 0.699),
    ("derma", "DivideMix", 0.0): (0.735, 0.826, 0.780),
    ("derma", "DivideMix", 0.2): (0.704, 0.743, 0.724),
    ("derma", "DivideMix", 0.4): (0.980, 0.471, 0.725),
    ("derma", "DivideMix+CS", 0.0): (0.977, 0.518, 0.748),
    ("derma", "DivideMix+CS", 0.2): (0.722, 0.594, 0.658),
    ("derma", "DivideMix+CS", 0.4): (0.663, 0.594, 0.629),
    ("derma", "UNICON", 0.0): (0.735, 0.826, 0.780),
    ("derma", "UNICON", 0.2): (0.704, 0.743, 0.724),
    ("derma", "UNICON", 0.4): (0.980, 0.485, 0.732),
    ("derma", "UNICON+CS", 0.0): (0.977, 0.518, 0.748),
    ("derma", "UNICON+CS", 0.2): (0.977, 0.411, 0.694),
    ("derma", "UNICON+CS", 0.4): (0.987, 0.474, 0.731),
    ("path", "Baseline", 0.0): (0.820, 0.981, 0.901),
    ("path", "Baseline", 0.2): (0.816, 0.957, 0.886),
    ("path", "Baseline", 0.4): (0.814, 0.922, 0.868),
    ("path", "Baseline+CS", 0.0): (0.814, 0.980, 0.897),
    ("path", "Baseline+CS", 0.2): (0.758, 0.707, 0.732),
    ("path", "Baseline+CS", 0.4): (0.855, 0.224, 0.540),
    ("path", "GMM Filter", 0.0): (0.823, 0.979, 0.901),
    ("path", "GMM Filter", 0.2): (0.850, 0.922, 0.886),
    ("path", "GMM Filter", 0.4): (0.776, 0.959, 0.868),
    ("path", "GMM Filter+CS", 0.0): (0.832, 0.971, 0.902),
    ("path", "GMM Filter+CS", 0.2): (0.845, 0.892, 0.868),
    ("path", "GMM Filter+CS", 0.4): (0.855, 0.765, 0.810),
    ("path", "Co-teaching", 0.0): (0.843, 0.984, 0.913),
    ("path", "Co-teaching", 0.2): (0.857, 0.954, 0.906),
    ("path", "Co-teaching", 0.4): (0.774, 0.966, 0.870),
    ("path", "Co-teaching+CS", 0.0): (0.835, 0.971, 0.903),
    ("path", "Co-teaching+CS", 0.2): (0.865, 0.933, 0.899),
    ("path", "Co-teaching+CS", 0.4): (0.968, 0.192, 0.580),
    ("path", "DivideMix", 0.0): (0.829, 0.961, 0.895),
    ("path", "DivideMix", 0.2): (0.833, 0.933, 0.883),
    ("path", "DivideMix", 0.4): (0.728, 0.957, 0.842),
    ("path", "DivideMix+CS", 0.0): (0.887, 0.905, 0.896),
    ("path", "DivideMix+CS", 0.2): (0.628, 0.826, 0.727),
    ("path", "DivideMix+CS", 0.4): (0.715, 0.799, 0.757),
    ("path", "UNICON", 0.0): (0.824, 0.972, 0.898),
    ("path", "UNICON", 0.2): (0.732, 0.952, 0.842),
    ("path", "UNICON", 0.4): (0.728, 0.957, 0.842),
    ("path", "UNICON+CS", 0.0): (0.887, 0.905, 0.896),
    ("path", "UNICON+CS", 0.2): (0.950, 0.617, 0.757),
    ("path", "UNICON+CS", 0.4): (0.904, 0.626, 0.757),
}

# Rows whose printed BAC is not the mean of the printed sensitivity and specificity.
TABLE2_INCONSISTENT = {("path", "UNICON+CS", 0.2), ("path", "UNICON+CS", 0.4)}

N_TEST = 2005
POSITIVES = 392
LOW_NOISE_COUNTS = dict(tp=POSITIVES - 114, fn=114, fp=204, tn=N_TEST - POSITIVES - 204)
HIGH_NOISE_COUNTS = dict(tp=POSITIVES - 59, fn=59, fp=910, tn=N_TEST - POSITIVES - 910)


def tiny_config(**overrides):
    """Fast configuration for harness plumbing tests (seconds, not minutes)."""
    import dataclasses

    from noisyrisk.datagen import SyntheticSpec
    from noisyrisk.harness.config import ExperimentConfig, TrainConfig

    base = ExperimentConfig(
        train=TrainConfig(epochs=6, warmup_epochs=2, batch_size=32, hidden=(16,)),
        data=SyntheticSpec(n_train=240, n_val=60, n_test=120, feature_dim=6, class_separation=3.0),
    )
    return dataclasses.replace(base, **overrides)


TINY_TOML = """
method = "baseline"
noise_rate = 0.2
seed = 3

[train]
epochs = 6
warmup_epochs = 2
batch_size = 32
hidden = [16]

[data]
source = "synthetic"
n_train = 240
n_val = 60
n_test = 120
feature_dim = 6
class_separation = 3.0
"""


def fake_result(method="baseline", cs=False, eta=0.0, seed=0, counts=None, dataset="d0", auc=None, collapse=None):
    """A successful RunResult built straight from confusion counts (no training)."""
    from noisyrisk.harness.runner import RunResult
    from noisyrisk.metrics import ConfusionCounts, record_from_counts

    c = counts if isinstance(counts, ConfusionCounts) else ConfusionCounts(**(counts or LOW_NOISE_COUNTS))
    rec = record_from_counts(c, auc_value=auc)
    if collapse is None:
        collapse = rec.ppr >= 0.9 or rec.ppr <= 0.1
    cfg = {"method": method, "cost_sensitive": cs, "noise_rate": eta, "seed": seed}
    return RunResult(
        fingerprint=f"{method}-{cs}-{eta}-{seed}",
        dataset_fingerprint=dataset,
        config=cfg,
        metrics=rec.to_dict(),
        collapse=collapse,
    )
