/** Error types surfaced by the bindings. */

/** Input tensors or labels do not match the declared geometry. */
export class ShapeError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "ShapeError";
  }
}

/** The augmentation CLI exited nonzero; carries its diagnostic text. */
export class CliError extends Error {
  readonly exitCode: number | null;
  readonly stderr: string;

  constructor(message: string, exitCode: number | null, stderr: string) {
    super(message);
    this.name = "CliError";
    this.exitCode = exitCode;
    this.stderr = stderr;
  }
}

export class RtenError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "RtenError";
  }
}

export class RtenBadMagicError extends RtenError {
  constructor(message: string) {
    super(message);
    this.name = "RtenBadMagicError";
  }
}

export class RtenDimOverflowError extends RtenError {
  constructor(message: string) {
    super(message);
    this.name = "RtenDimOverflowError";
  }
}

export class RtenTruncatedError extends RtenError {
  constructor(message: string) {
    super(message);
    this.name = "RtenTruncatedError";
  }
}
