"""Mass-subcritical focusing case, B = 1.125: global existence and orbital stability"""

from lab_config import config_from_dict

model = {"N": 2, "alpha": 0.8, "gamma": 0.1, "p": 2.0, "epsilon": 1}

evolution = {
	# T = 5 horizon of the trapping and stability runs
	"dt": 1e-3,
	"T": 5.0,
	"record_every": 50,
}

initial = {
	"kind": "gaussian",
	"amplitude": 0.5,
	"width": 0.5,
}


def get_config():
	return config_from_dict({
		"name": "subcritical",
		"params": dict(model),
		"evolution": dict(evolution),
		"initial": dict(initial),
	})
