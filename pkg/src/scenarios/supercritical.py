"""Mass-supercritical focusing case, B = 3.25: ground state, sharp constant and potential well"""

from lab_config import config_from_dict

model = {"N": 2, "alpha": 0.8, "gamma": 0.4, "p": 4.0, "epsilon": 1}

evolution = {
	"dt": 1e-3,
	"T": 5.0,
	"record_every": 50,
}

initial = {
	"kind": "groundstate",
	"amplitude": 0.9,
	"well_amplitudes": [0.5, 0.6, 0.7, 0.8, 0.9],
}


def get_config():
	return config_from_dict({
		"name": "supercritical",
		"params": dict(model),
		"evolution": dict(evolution),
		"initial": dict(initial),
	})
