from enum import Enum
from typing import List


class PatchKind(Enum):
    """The nine facial patches each image is split into; definition order is graph order."""

    FACE              = "face"
    RIGHT_EYE         = "right_eye"
    LEFT_EYE          = "left_eye"
    NOSE              = "nose"
    MOUTH             = "mouth"
    FACE_NO_RIGHT_EYE = "face_no_right_eye"  # whole face with the component masked out
    FACE_NO_LEFT_EYE  = "face_no_left_eye"
    FACE_NO_NOSE      = "face_no_nose"
    FACE_NO_MOUTH     = "face_no_mouth"

    @property
    def position(self) -> int:
        """Index of this patch's paired graph in the forest."""
        return list(self.__class__).index(self)

    @classmethod
    def values(cls) -> List[str]: return [kind.value for kind in cls]


GRAPH_COUNT = len(PatchKind)
