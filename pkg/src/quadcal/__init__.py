"""quadcal: multiport VNA calibration toolkit.

Library for SOLR calibration of orthogonal probe ports (eight-term error
model and its four-port generalization), multiline-TRL characterization of
on-chip Short/Open/Load standards, Touchstone v1 interchange, and a
deterministic synthetic-measurement harness for end-to-end validation.
"""

from .errormodel import (MultiPortCalModel, OnePortTerms, PortErrorBox,
                         correct_multiport, correct_oneport, embed_multiport,
                         embed_oneport, read_cal_model, reciprocal_split,
                         write_cal_model)
from .harness import (Scenario, check_network, make_truth_model, run_cal,
                      run_characterize, run_correct, scenario_from_config,
                      simulate_measurements)
from .network import (FrequencyGrid, Network, TwoPortT, cascade, ideal_thru,
                      passivity_margin, reciprocity_error, s_to_t, t_to_s,
                      terminate)
from .solvers import (CharacterizedStandards, GammaEstimate, MtrlInput,
                      MtrlResult, SolrInput, SolrResult, build_fourport_cal,
                      characterize_standards, solve_mtrl, solve_one_port_sol,
                      solve_solr, thru_delay_mismatch)
from .standards import (FixtureModel, FitResult, LineModel, LoadModel,
                        ReflectPoly, StandardPack, ThresholdReport, TuneLine,
                        builtin_pack_path, eval_fixture, eval_line, eval_load,
                        eval_reflect, fit_reflect_poly, load_builtin_pack,
                        load_standard_pack, threshold_report)
from .touchstone import (TouchstoneOptions, parse_touchstone, ports_from_path,
                         read_touchstone_file, write_touchstone,
                         write_touchstone_file)

__version__ = "1.0.0"
