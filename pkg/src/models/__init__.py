from .optimizer import AdamW, OptimizerState
from .schedule import cycle_ends, lr_at
from .network import BasecallerNet, NetOutput, build_model
from .evaluation import EvalReport, align, evaluate, speed_fit, write_report
from .basecaller import basecall, call_read, load_model
from .trainer import train, train_step
from .experiments import evaluate_calls, run_ablation
from .plots import export_plots
