from .audit_logger import RunAuditLogger, RunAuditRecord, get_run_audit_logger

__all__ = ['RunAuditLogger', 'RunAuditRecord', 'get_run_audit_logger']
