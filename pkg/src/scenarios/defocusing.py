"""Defocusing run (epsilon = -1): conservation over T = 1"""

from lab_config import config_from_dict

model = {"N": 2, "alpha": 0.8, "gamma": 0.1, "p": 2.0, "epsilon": -1}

evolution = {
	"dt": 1e-3,
	"T": 1.0,
	"record_every": 10,
}

initial = {
	"kind": "gaussian",
	"amplitude": 1.0,
	"width": 0.5,
}


def get_config():
	return config_from_dict({
		"name": "defocusing",
		"params": dict(model),
		"evolution": dict(evolution),
		"initial": dict(initial),
	})
