#!/usr/bin/env python3
"""
Analytic CIL - Web Application
A Flask service answering predictions from a saved analytic state.

The service is read-only. It loads the experiment config named by the
ACIL_CONFIG environment variable, the state file and the run report from the
config's output directory, and rebuilds the seeded feature pipeline. Every
request reads the same immutable snapshot.

Routes:
- GET  /          status
- GET  /state     class registry, gamma, phase count and memory accounting
- POST /predict   backbone feature rows -> class ids and scores
- GET  /report    the saved run report
- GET  /benchmark timing of one recursive update
"""
from dataclasses import dataclass
from typing import Any, Dict, Optional
import logging
import os
import sys

import numpy as np
from flask import Flask, jsonify, request

# Add the project root to the Python path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '../..')))

from src.core.analytic import AnalyticState, predict
from src.core.errors import AcilError, ValidationError
from src.core.features import (Extractor, FeatureExpander, build_extractor, extract_and_expand,
                               make_expander)
from src.core.state_io import read_state_file
from src.experiment.reports import load_report
from src.experiment.runner import REPORT_FILENAME, STATE_FILENAME
from src.utils.config import ExperimentConfig, load_config
from src.utils.helpers import benchmark_update

CONFIG_ENV = "ACIL_CONFIG"

logger = logging.getLogger(__name__)

app = Flask(__name__)


@dataclass(frozen=True, eq=False)
class ModelSnapshot:
    """Everything a prediction needs, loaded once."""
    config: ExperimentConfig
    state: AnalyticState
    extractor: Extractor
    expander: FeatureExpander
    report: Dict[str, Any]

    def predict(self, raw: np.ndarray) -> Dict[str, Any]:
        X_fe = extract_and_expand(self.extractor, self.expander, raw)
        prediction = predict(self.state, X_fe)
        return {
            'classIds': [int(c) for c in prediction.class_ids],
            'scores': prediction.scores.tolist(),
            'classRegistry': list(self.state.class_registry),
        }


def load_snapshot(config: ExperimentConfig) -> ModelSnapshot:
    """Read the state and report of a finished run and rebuild its feature pipeline."""
    state = read_state_file(os.path.join(config.output_dir, STATE_FILENAME))
    report = load_report(os.path.join(config.output_dir, REPORT_FILENAME))
    if report.get('kind', 'run') != 'run':
        raise ValidationError("the service needs the report of a single run")
    input_width = int(report['expander']['input_width'])
    extractor = build_extractor(config.extractor, input_width)
    expander = make_expander(extractor.output_width, config.d_fe, config.fe_seed, config.fe_std)
    if expander.d_fe != state.d_fe:
        raise ValidationError(
            f"dimension mismatch: config d_fe={expander.d_fe}, saved state d_fe={state.d_fe}")
    logger.info("Serving %d classes (d_fe=%d) from %s",
                state.n_classes, state.d_fe, config.output_dir)
    return ModelSnapshot(config, state, extractor, expander, report)


_snapshot: Optional[ModelSnapshot] = None


def get_snapshot() -> ModelSnapshot:
    """The loaded snapshot; loaded from ACIL_CONFIG on first use."""
    global _snapshot
    if _snapshot is None:
        path = os.environ.get(CONFIG_ENV)
        if not path:
            raise ValidationError(f"{CONFIG_ENV} is not set")
        _snapshot = load_snapshot(load_config(path))
    return _snapshot


def error_response(error: Exception):
    """Map an exception to a JSON error; validation problems are client errors."""
    status = 400 if isinstance(error, ValidationError) else 500
    if status == 500:
        logger.exception("Request failed")
    return jsonify({'error': str(error)}), status


@app.route('/')
def index():
    """Service status."""
    try:
        snapshot = get_snapshot()
    except AcilError as e:
        return jsonify({'status': 'unavailable', 'error': str(e)}), 503
    return jsonify({
        'status': 'ok',
        'classes': snapshot.state.n_classes,
        'phases': snapshot.state.phase_count,
        'dFe': snapshot.state.d_fe,
    })


@app.route('/state')
def state_summary():
    """Describe the saved state without exposing W or R."""
    try:
        state = get_snapshot().state
        return jsonify({
            'classRegistry': list(state.class_registry),
            'gamma': state.gamma,
            'phaseCount': state.phase_count,
            'dFe': state.d_fe,
            'memory': state.memory_footprint(),
        })
    except Exception as e:
        return error_response(e)


@app.route('/predict', methods=['POST'])
def predict_route():
    """Predict class ids for backbone feature rows."""
    try:
        data = request.get_json(silent=True)
        if not isinstance(data, dict) or 'features' not in data:
            return jsonify({'error': 'Request body must be JSON with a "features" list'}), 400
        try:
            raw = np.asarray(data['features'], dtype=np.float64)
        except (TypeError, ValueError):
            return jsonify({'error': 'Features must be numeric'}), 400
        if raw.ndim == 1:
            raw = raw.reshape(1, -1)
        if raw.ndim != 2 or raw.shape[0] == 0:
            return jsonify({'error': 'Features must be a non-empty list of rows'}), 400
        if not np.all(np.isfinite(raw)):
            return jsonify({'error': 'Features must be finite'}), 400
        return jsonify(get_snapshot().predict(raw))
    except Exception as e:
        return error_response(e)


@app.route('/report')
def report():
    """The saved run report."""
    try:
        return jsonify(get_snapshot().report)
    except Exception as e:
        return error_response(e)


@app.route('/benchmark')
def run_benchmark():
    """API endpoint to run the benchmark."""
    try:
        d_fe = int(request.args.get('dFe', 512))
        n_rows = int(request.args.get('rows', 256))
    except ValueError:
        return jsonify({'error': 'dFe and rows must be integers'}), 400
    if not (1 <= d_fe <= 4096 and 1 <= n_rows <= 8192):
        return jsonify({'error': 'dFe must be in [1, 4096] and rows in [1, 8192]'}), 400
    timings = benchmark_update(d_fe, n_rows)
    return jsonify({
        'status': 'success',
        **timings,
    })


if __name__ == '__main__':
    port = int(os.environ.get('PORT', 5000))
    app.run(host='0.0.0.0', port=port)
