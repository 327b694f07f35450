"""Content-centric wireless delivery: PET codec, content-rate metric,
converged broadcast/unicast planning and NSP crowdsourcing."""

from .catalog import (INF, CacheSpec, ContentObject, ContentRateReport, DiversityMatrix, ServiceRequest,
                      WirelessBudget, bandwidth_lower_bound, bandwidth_upper_bound, build_diversity_matrix,
                      check_achievable, content_rate)
from .crowd import Assignment, SlaOffer, TaskProfile, match_exact, match_greedy, negotiate
from .delivery import BroadcastAction, CacheDirective, DeliveryPlan, PacketRef, UnicastAction
from .pet import (NotYetDecodable, PetLayout, PetPacket, PriorityProfile, assign_priorities, pet_decode,
                  pet_encode, pet_feasible)
from .sched import (ConvergedConfig, SimReport, plan_broadcast_all, plan_converged, plan_unicast, simulate,
                    users_per_cell)
from .workload import TraceConfig, ZipfParams, generate_trace, zipf_pmf

__version__ = "0.1.0"
