"""Mass-critical focusing case, B = 2: initial mass at half of the threshold ((p+1)/(2C))^(2/A)"""

from lab_config import config_from_dict

model = {"N": 2, "alpha": 0.8, "gamma": 0.1, "p": 2.7, "epsilon": 1}

evolution = {
	"dt": 1e-3,
	"T": 5.0,
	"record_every": 50,
}

initial = {
	"kind": "groundstate",
	"mass_fraction": 0.5,
}


def get_config():
	return config_from_dict({
		"name": "critical",
		"params": dict(model),
		"evolution": dict(evolution),
		"initial": dict(initial),
	})
