"""Replay the bundled reference coefficient tables through the classifier.

The package ships the previously reported learning-speed estimates for 18
market experiments.  Feeding them through the hypothesis system reproduces
the reported verdicts without any subject-level data, and locates the
satisficing threshold relative to the median error per experiment.
"""

from ltfelab.refdata import load_reference_table, replay_classifications

for which, label in (("binary", "binary learning speed"),
                     ("huber", "robust continuous learning speed")):
    table = load_reference_table(which)
    classifications = replay_classifications(table)
    agree = sum(
        cls.verdict == row["published_class"]
        for (_, row), cls in zip(table.iterrows(), classifications)
    )
    print(f"== {label}: {agree}/{len(classifications)} verdicts match the reported ones")
    print(f"{'experiment':22} {'panel':12} {'verdict':14} threshold")
    for (_, row), cls in zip(table.iterrows(), classifications):
        mark = "" if cls.verdict == row["published_class"] else "  <- reported " + row["published_class"]
        print(f"{cls.experiment:22} {row['panel']:12} {cls.verdict:14} {cls.z_location}{mark}")
    print()

binary = load_reference_table("binary")
at_median = sorted(
    int(row["model"])
    for (_, row), cls in zip(binary.iterrows(), replay_classifications(binary))
    if cls.z_location == "at-median"
)
print(f"experiments whose threshold sits right at the median error: {at_median}")
print("everywhere else the threshold sits below the median, i.e. subjects")
print("tolerate less error than their typical miss before speeding up learning.")
