"""Synthetic quadruped data: terrains, a kinematic trot and sensor models."""

from .gait import GaitConfig, GroundTruth, SlipEvent, generate_truth, inject_slip, random_slip_events
from .sensors import Sequence, SensorNoiseSpec, simulate_sequence, synthesize_sensors
from .terrain import TerrainProfile, composite_course

__all__ = [
    "GaitConfig",
    "GroundTruth",
    "SensorNoiseSpec",
    "Sequence",
    "SlipEvent",
    "TerrainProfile",
    "composite_course",
    "generate_truth",
    "inject_slip",
    "random_slip_events",
    "simulate_sequence",
    "synthesize_sensors",
]
