from typing import Dict, List, Any, Optional
import logging
from pathlib import Path
import pandas as pd
import numpy as np
from dataclasses import dataclass, asdict

@dataclass
class TamperSummary:
    """Data class for tamper experiment summary"""
    block_index: int
    mutation: str
    trials: int
    sampled: bool
    internal_detection_rate: float
    linkage_detection_rate: float
    detection_rate: float
    accepted: int
    expected_detection_rate: Optional[float] = None

class AnalyticsService:
    def __init__(self):
        """Initialize analytics service"""
        self.logger = logging.getLogger(__name__)

    def summarize_tamper_trials(
        self,
        trials: List[Dict[str, Any]],
        block_index: int,
        mutation: str,
        sampled: bool = False,
        expected_detection_rate: Optional[float] = None
    ) -> TamperSummary:
        """Aggregate per-trial validation outcomes into detection rates"""
        try:
            if not trials:
                raise ValueError("No tamper trials to summarize")

            df = pd.DataFrame(trials)
            df['internal_detected'] = ~df['internal_ok']
            df['linkage_detected'] = ~df['linkage_ok']
            df['detected'] = df['internal_detected'] | df['linkage_detected']

            summary = TamperSummary(
                block_index=block_index,
                mutation=mutation,
                trials=len(df),
                sampled=sampled,
                internal_detection_rate=float(df['internal_detected'].mean()),
                linkage_detection_rate=float(df['linkage_detected'].mean()),
                detection_rate=float(df['detected'].mean()),
                accepted=int((~df['detected']).sum()),
                expected_detection_rate=expected_detection_rate
            )
            self.logger.info(
                f"Tamper experiment on block {block_index} ({mutation}): "
                f"{summary.detection_rate:.4f} detected over {summary.trials} trials"
            )
            return summary

        except Exception as e:
            self.logger.error(f"Failed to summarize tamper trials: {e}")
            raise

    def tamper_report(self, summary: TamperSummary) -> Dict[str, Any]:
        return asdict(summary)

    def distribution_frame(self, initial: np.ndarray, final: np.ndarray) -> pd.DataFrame:
        """Position-indexed initial and final probabilities"""
        return pd.DataFrame({
            'position': np.arange(len(final)),
            'initial': np.asarray(initial, dtype=float),
            'final': np.asarray(final, dtype=float)
        })

    def write_gnuplot_columns(self, frame: pd.DataFrame, path: Path, title: str) -> Path:
        """Whitespace-separated columns with a commented header"""
        try:
            with open(path, 'w', encoding='utf-8') as f:
                f.write(f"# {title}\n")
                f.write("# " + " ".join(frame.columns) + "\n")
                frame.to_csv(f, sep=' ', header=False, index=False, float_format='%.12f')
            self.logger.info(f"Wrote gnuplot columns to {path}")
            return path
        except OSError as e:
            self.logger.error(f"Failed to write gnuplot columns: {e}")
            raise

    def election_frame(self, transcript: Dict[str, Any]) -> pd.DataFrame:
        """One row per candidate with per-row results and totals"""
        tallies = transcript['public']['tallies']
        df = pd.DataFrame([
            {'candidate': k, 'total': t['total'], 'row_results': t['row_results']}
            for k, t in tallies.items()
        ])
        df['elected'] = df['candidate'].isin(transcript['public'].get('elected', []))
        return df.sort_values(['total', 'candidate'], ascending=[False, True]).reset_index(drop=True)
