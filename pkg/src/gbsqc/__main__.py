from gbsqc.cli import main

raise SystemExit(main())
