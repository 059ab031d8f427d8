"""Best-channel selection under limited sensing for vehicular dynamic spectrum access."""
from .allocation import (AllocationPlan, SearchFrontier, equal_allocation, global_optimal,
                         heuristic_allocation, iterative_optimal)
from .bounds import (BoundEvaluator, SuccessBounds, bounds_for_plan, brute_force_success,
                     estimate_distribution, min_distribution, success_bounds)
from .bumblebee import EngineConfig, initialize, run_engine, switching_decision, vdsa_step
from .core import ChannelSet, CbrEstimate, SensingLedger, estimate_cbr, select_channel
from .errors import CapacityError, ConfigError, DomainError, TraceFormatError
from .memory import MemoryConfig, ewma_smooth, swa_smooth, windowed_estimate
from .scenario import (ReceptionReport, ScenarioTrace, TrafficScenario, load_trace, run_platoon,
                       save_trace, synth_trace)

__version__ = "0.1.0"
