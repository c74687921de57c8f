"""One-dimensional debug run, outside the N >= 2 regime of the theory"""

from lab_config import config_from_dict

model = {"N": 1, "alpha": 0.75, "gamma": 0.0, "p": 3.0, "epsilon": 1, "debug": True}

evolution = {
	"dt": 1e-3,
	"T": 1.0,
	"record_every": 10,
}


def get_config():
	return config_from_dict({
		"name": "debug_1d",
		"params": dict(model),
		"evolution": dict(evolution),
	})
