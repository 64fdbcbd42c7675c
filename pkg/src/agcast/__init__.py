"""agcast: outlier-aware forecasting of commodity production from index series.

The package detects outlier events in financial index series with a
from-scratch isolation forest, pairs each commodity with its most
correlated and most causally linked indices, and forecasts production with
regression baselines and an LSTM, quantifying what the outlier-event flags
contribute as a model feature.
"""

from .baselines import (
    GradientBoosting,
    PolynomialRegression,
    RandomForest,
    RegressionTree,
)
from .dataio import (
    CsvSchema,
    MonthlyPanel,
    SyntheticSpec,
    TimeSeries,
    align_to_month_start,
    generate_linked_panel,
    generate_synthetic,
    load_csv,
    merge_panel,
    read_panel_csv,
    write_panel_csv,
)
from .lstm import ForecastResult, LstmForecaster, cell_forward
from .outliers import (
    IsolationForestDetector,
    OutlierFlags,
    contamination_from_iqr,
    expected_bst_path_length,
    flag_series,
    quartiles,
)
from .preprocess import (
    MinMaxScaler,
    ScalerParams,
    WindowedDataset,
    double_rolling_aggregate,
    fit_minmax,
    inverse_minmax,
    make_windows,
    transform_minmax,
)
from .relations import (
    PairingResult,
    RelationMatrix,
    build_relation_matrix,
    causation_score,
    pair_features,
    pearson,
)
from .report import EvalReport, EvalRow, build_comparison, r2, rmse

__version__ = "0.1.0"

__all__ = [
    "CsvSchema", "MonthlyPanel", "SyntheticSpec", "TimeSeries",
    "align_to_month_start", "generate_linked_panel", "generate_synthetic",
    "load_csv", "merge_panel", "read_panel_csv", "write_panel_csv",
    "MinMaxScaler", "ScalerParams", "WindowedDataset",
    "double_rolling_aggregate", "fit_minmax", "inverse_minmax",
    "make_windows", "transform_minmax",
    "IsolationForestDetector", "OutlierFlags", "contamination_from_iqr",
    "expected_bst_path_length", "flag_series", "quartiles",
    "PairingResult", "RelationMatrix", "build_relation_matrix",
    "causation_score", "pair_features", "pearson",
    "GradientBoosting", "PolynomialRegression", "RandomForest",
    "RegressionTree",
    "ForecastResult", "LstmForecaster", "cell_forward",
    "EvalReport", "EvalRow", "build_comparison", "r2", "rmse",
    "__version__",
]
