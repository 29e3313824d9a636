from emulator_forge.cli import main


raise SystemExit(main())
