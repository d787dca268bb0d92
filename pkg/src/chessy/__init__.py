"""Hybrid co-emulation of a debugger-controlled target with loosely-timed peripheral models."""

from .adapter import AccessEntry, Adapter, SessionConfig, SessionReport, run_session
from .bench import LinkModel, SweepConfig, compute_overhead, generate_workload, run_sweep, temponet_profile
from .core import (
    ClockSpec,
    SimTime,
    TransactionRecord,
    VpRequest,
    VpResponse,
    cycles_to_micros,
    decode_transaction,
    encode_transaction,
)
from .kernel import AddressMap, SimKernel, load_address_map, parse_address_map
from .peripherals import EmgSensor, RegisterFile, RobotArm
from .rsp import RspClient, StopReply, frame, parse
from .script import Compute, Loop, Read, WorkloadScript, Write
from .target import TargetEmulator, run_baseline, serve

__version__ = "0.1.0"
