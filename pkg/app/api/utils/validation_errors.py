from fastapi import HTTPException


class CustomValidationError(HTTPException):
    def __init__(self, message: str):
        super().__init__(status_code=422, detail=message)


class GeometryValidationError(CustomValidationError):
    def __init__(self, message: str):
        super().__init__(message=message)


class GainsValidationError(CustomValidationError):
    def __init__(self, message: str):
        super().__init__(message=message)


class TimelineValidationError(CustomValidationError):
    def __init__(self, message: str):
        super().__init__(message=message)


class TiltAngleValidationError(CustomValidationError):
    def __init__(self, message: str):
        super().__init__(message=message)


class AeroParamsValidationError(CustomValidationError):
    def __init__(self, message: str):
        super().__init__(message=message)


class GridValidationError(CustomValidationError):
    def __init__(self, message: str):
        super().__init__(message=message)
