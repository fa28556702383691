from factpipe.evaluation.datasets import (
    DatasetExample,
    adapt_record,
    load_dataset,
    map_label,
    stratified_sample,
)
from factpipe.evaluation.judge import CRITERIA, JudgeRanking, judge_explanations, parse_judge_reply
from factpipe.evaluation.metrics import as_gold, f1_score, macro_f1, mar
from factpipe.evaluation.report import (
    build_report,
    format_score,
    render_text,
    score_delta,
    stratum_rows,
    write_report,
)

__all__ = [
    "CRITERIA", "DatasetExample", "JudgeRanking", "adapt_record", "as_gold", "build_report",
    "f1_score", "format_score", "judge_explanations", "load_dataset", "macro_f1", "map_label",
    "mar", "parse_judge_reply", "render_text", "score_delta", "stratified_sample",
    "stratum_rows", "write_report",
]
