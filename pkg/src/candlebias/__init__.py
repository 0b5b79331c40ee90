"""Next-day direction labeling for OHLCV candles plus four from-scratch classifiers.

Subpackages by responsibility: ``dataset`` (CSV ingestion, labeling, splits,
standardization), ``logistic`` (batch gradient-descent logistic regression),
``trees`` (entropy decision tree and bootstrap random forest with OOB error),
``neural`` (feedforward net trained with Adam), ``metrics`` (accuracy, F1,
confusion matrix, report rendering) and ``cli`` (prepare/train/evaluate/compare
pipeline).
"""

__version__ = "0.1.0"
