from ccs.annotate import Marker, InterventionAnnotation
from ccs.profile import Partition
from ccs.router import AlignmentReport, RoutingDirective, Verdict
from ccs.stats import TrialRecord

_NO_EVIDENCE = AlignmentReport(0.0, (), (), 0.5, Verdict.NO_EVIDENCE)


def record(item_id, condition, partition, level, subject="machine_learning", substrate="mock"):
    directive = None
    if partition is not None:
        directive = RoutingDirective(subject, partition, 0, _NO_EVIDENCE, "strong_silent")
    markers = frozenset({Marker.INTERVENTION}) if level else frozenset()
    ann = InterventionAnnotation(level >= 1, level, markers, True, ())
    return TrialRecord(
        item_id=item_id,
        subject=subject,
        condition=condition,
        substrate_id=substrate,
        directive=directive,
        annotation=ann,
        raw_response_digest=None,
    )


def pair(item_id, level_a, level_b, part_a=Partition.STRONG, part_b=Partition.WEAK):
    return record(item_id, "A", part_a, level_a), record(item_id, "B", part_b, level_b)
