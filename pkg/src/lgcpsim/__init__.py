"""Simulator for area-grouped V2X collaborative perception.

CAV groups are assigned to road areas by confidence gain, their feature
transmissions are scheduled under half-duplex and co-channel interference
constraints, and end-to-end latency and volume are compared with
vehicle-based and edge-assisted exchange.
"""

from .assignment import Assignment, Group, brute_force_groups, select_groups
from .confidence import (ConfidenceMap, SyntheticConfidenceParams, global_confidence, group_confidence,
                         load_confidence, synthetic_confidence)
from .errors import (InvalidArgumentError, LgcpError, ParseError, RefusalError, SchedulingError,
                     ValidationError)
from .paradigms import (ControlMessageSizes, LatencyBreakdown, ParadigmReport, edge_assisted_run, lgcp_run,
                        objective, vehicle_based_run)
from .radio import ChannelParams, LinkState, achievable_rate_bps, conflicts, link_state, path_loss_db
from .scenario import (CavState, RoiGrid, Scenario, build_grid, generate_scenario, load_scenario,
                       mark_occupancy, save_scenario)
from .scheduler import (FusionCostModel, Packet, Schedule, brute_force_schedule, build_packets, priority,
                        schedule, schedule_random)

__version__ = "0.1.0"
