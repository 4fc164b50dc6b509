from .degrade import DEGRADATIONS, bicubic_degrade, degrade, kspace_truncate, spectral_upsample
from .patches import (
    EXECUTIONS,
    DatasetSpec,
    PatchBatch,
    VolumePair,
    augment,
    augment_batch,
    dihedral,
    extract_patches,
    make_pair,
)
from .volume import (
    PhantomParams,
    Volume,
    VolumeFormatError,
    band_limit_mask,
    load_volume,
    partition,
    read_manifest,
    save_volume,
    synth_phantom,
    write_manifest,
)
