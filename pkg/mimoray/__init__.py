from .TriangleMesh import TriangleMesh, Ray, Hit, RigidTransform
from .TriangleMesh import MeshError, MeshParseError, DegenerateFaces, InvalidTransform
from .TriangleMesh import load_mesh, write_obj, combine_meshes, sample_triangle_points
from .AccelStructure import AccelStructure, build_accel, brute_force_intersect

from .ArrayGeometry import ArrayGeometry, ArrayGeometryError, build_square_array
from .Waveform import Waveform, WaveformError, build_waveform, derived_metrics
from .VoxelGrid import VoxelGrid, GridError

from .Material import MaterialParams, MaterialError, ScatterSample
from .Material import sample_diffuse, reflect_specular, scatter

from .RayTracer import TraceConfig, PATH_RECORD_DTYPE, trace_tx, trace_all, capture_rx
from .Baseband import BasebandCube, DimensionMismatch, synthesize_channel, synthesize_cube, add_noise
from .BackProjection import Volume, backproject, backproject_reference
from .RadarImage import RadarImage, EmptyImage, max_project, finalize_image, image_similarity

from .formats import FormatError
from .ArtifactStore import ArtifactStore, ArtifactInUse
from .ArtifactIndex import ArtifactIndex, ArtifactNotIndexed, ArtifactIndexCorrupt
from .Scenario import Scenario, ScenarioError, StageInputMissing, load_scenario, validate_scenario
from .Pipeline import Pipeline, run_scenario
