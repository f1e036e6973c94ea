from enum import IntEnum


class FaultLabel(IntEnum):
    """The five bearing conditions, with stable integer codes 0-4."""

    NORMAL = 0
    DRIVE_INNER_SPALL = 1
    NON_DRIVE_INNER_SPALL = 2
    DRIVE_OUTER_SPALL = 3
    NON_DRIVE_OUTER_SPALL = 4

    @property
    def display(self):
        return _DISPLAY[self]

    @classmethod
    def from_name(cls, name):
        """Accept either the display name (``DriveInnerSpall``) or the enum name."""
        for label, disp in _DISPLAY.items():
            if name == disp or name.upper() == label.name:
                return label
        raise ValueError(f"unknown fault label {name!r}")


_DISPLAY = {
    FaultLabel.NORMAL: "Normal",
    FaultLabel.DRIVE_INNER_SPALL: "DriveInnerSpall",
    FaultLabel.NON_DRIVE_INNER_SPALL: "NonDriveInnerSpall",
    FaultLabel.DRIVE_OUTER_SPALL: "DriveOuterSpall",
    FaultLabel.NON_DRIVE_OUTER_SPALL: "NonDriveOuterSpall",
}

CLASS_NAMES = tuple(_DISPLAY[label] for label in FaultLabel)
