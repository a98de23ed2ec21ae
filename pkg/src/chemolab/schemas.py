"""JSON schemas for scenario/sweep configs and the run summary."""

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}
_opt_num = {"type": ["number", "null"]}

SCENARIO_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["chi", "r", "mu", "alpha", "beta", "lambda", "nx", "ny", "t_end",
                 "initial_kind", "initial_c"],
    "properties": {
        "chi": _nonneg,
        "r": _pos,
        "mu": _pos,
        "alpha": _pos,
        "beta": _pos,
        "lambda": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "nx": {"type": "integer", "minimum": 4},
        "ny": {"type": "integer", "minimum": 4},
        "lx": _pos,
        "ly": _pos,
        "dt_init": _pos,
        "dt_min": _pos,
        "dt_max": _pos,
        "cfl_safety": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "t_end": _pos,
        "u_cap": _pos,
        "v_floor": _pos,
        "elliptic_rel_tol": {"type": "number", "exclusiveMinimum": 0, "maximum": 1e-2},
        "elliptic_max_iter": {"type": ["integer", "null"], "minimum": 1},
        "n_dim": {"type": "integer", "minimum": 2},
        "p_list": {"type": "array", "items": {"type": "number", "minimum": 2}, "minItems": 1},
        "q": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "eta": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "initial_kind": {"enum": ["constant", "perturbed", "random"]},
        "initial_c": _pos,
        "initial_amplitude": _nonneg,
        "initial_kx": {"type": "integer", "minimum": 0},
        "initial_ky": {"type": "integer", "minimum": 0},
        "initial_seed": {"type": ["integer", "null"], "minimum": 0},
        "sample_every": _pos,
        "t_late": _opt_num,
        "v_lower_check": {"type": ["boolean", "null"]},
        "fit_t_min": _nonneg,
        "fit_rel_floor": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "output_dir": {"type": ["string", "null"]},
    },
}

SWEEP_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["base", "axes"],
    "properties": {
        "base": {"type": "object"},
        "axes": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["name", "values"],
                "properties": {
                    "name": {"enum": ["mu", "chi", "lambda"]},
                    "values": {"type": "array", "items": _num, "minItems": 1},
                },
            },
        },
        "parallelism": {"type": "integer", "minimum": 1},
    },
}

_threshold_value = {"oneOf": [
    _num,
    {"type": "object", "required": ["domain_error"],
     "properties": {"domain_error": {"type": "string"}}},
]}

SUMMARY_SCHEMA = {
    "type": "object",
    "required": ["params", "thresholds", "outcome", "tail", "rates"],
    "properties": {
        "params": {"type": "object"},
        "thresholds": {
            "type": "object",
            "required": ["delta0", "mu1_star", "mu2_star", "mu3_star", "mu4_star", "mu_tilde",
                         "rate_energy", "rate_sup", "flags"],
            "properties": {
                "delta0": _num,
                "mu1_star": {"type": "object", "additionalProperties": _threshold_value},
                "mu2_star": _threshold_value,
                "mu3_star": _threshold_value,
                "mu4_star": _num,
                "mu_tilde": _num,
                "rate_energy": _num,
                "rate_sup": _num,
                "flags": {"type": "object"},
            },
        },
        "outcome": {
            "type": "object",
            "required": ["status", "reason", "t_final"],
            "properties": {
                "status": {"enum": ["Completed", "BlowUpSuspected", "SolverFailure"]},
                "reason": {"type": "string"},
                "t_final": _num,
            },
        },
        "tail": {
            "type": "object",
            "required": ["mass_min", "lp2_max", "min_v_min", "dist_sup_final"],
            "properties": {k: _opt_num for k in ["mass_min", "lp2_max", "min_v_min", "dist_sup_final"]},
        },
        "rates": {
            "type": "object",
            "required": ["fitted_l2sq", "fitted_energy", "predicted_energy", "predicted_sup"],
            "properties": {
                "fitted_l2sq": _opt_num,
                "fitted_energy": _opt_num,
                "predicted_energy": _num,
                "predicted_sup": _num,
            },
        },
    },
}
